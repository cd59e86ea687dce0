"""Uniform time grids, boundary quadrature and causal convolution.

Everything downstream works on samples taken at the nodes of a uniform
:class:`TimeGrid`.  Time-indexed arrays ("samples") carry the time axis
first, so a boundary-valued signal has shape ``(n_steps + 1, n_boundary)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InvalidArgument(ValueError):
    """Raised when an operation receives arguments violating its preconditions."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_i = i * T / n_steps`` on ``[0, T]``."""

    T: float
    n_steps: int

    def __post_init__(self):
        if not np.isfinite(self.T) or self.T <= 0:
            raise InvalidArgument(f"horizon T must be positive, got {self.T!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise InvalidArgument(f"n_steps must be an integer >= 2, got {self.n_steps!r}")

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    @property
    def size(self) -> int:
        return self.n_steps + 1

    def weights(self) -> np.ndarray:
        """Trapezoid weights for ``int_0^T`` on the nodes."""
        w = np.full(self.size, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        return w

    def refined(self) -> "TimeGrid":
        return TimeGrid(self.T, 2 * self.n_steps)


def make_time_grid(T: float, n_steps: int) -> TimeGrid:
    if isinstance(n_steps, float) and n_steps.is_integer():
        n_steps = int(n_steps)
    return TimeGrid(float(T), n_steps)


@dataclass(frozen=True)
class BoundaryGrid:
    """Quadrature nodes and surface-measure weights on the control boundary."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.atleast_1d(np.asarray(self.points, dtype=float))
        wts = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if pts.shape != wts.shape or pts.ndim != 1 or pts.size == 0:
            raise InvalidArgument("boundary points and weights must be matching 1-D arrays")
        if np.any(wts <= 0):
            raise InvalidArgument("boundary weights must be positive")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    @classmethod
    def point(cls, x: float = 0.0) -> "BoundaryGrid":
        """A zero-dimensional boundary (beam end); counting measure."""
        return cls(np.array([x]), np.array([1.0]))

    @classmethod
    def endpoints(cls, length: float = 1.0) -> "BoundaryGrid":
        return cls(np.array([0.0, length]), np.array([1.0, 1.0]))

    @classmethod
    def uniform(cls, length: float, n_nodes: int) -> "BoundaryGrid":
        """Trapezoid nodes along a straight edge ``[0, length]``."""
        if length <= 0:
            raise InvalidArgument(f"edge length must be positive, got {length!r}")
        if n_nodes < 2:
            raise InvalidArgument(f"an edge needs at least 2 nodes, got {n_nodes!r}")
        pts = np.linspace(0.0, length, n_nodes)
        h = length / (n_nodes - 1)
        wts = np.full(n_nodes, h)
        wts[0] = wts[-1] = 0.5 * h
        return cls(pts, wts)

    @property
    def size(self) -> int:
        return self.points.size

    @property
    def measure(self) -> float:
        return float(self.weights.sum())


def check_samples(grid: TimeGrid, f, name: str = "samples") -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.ndim == 0 or f.shape[0] != grid.size:
        raise InvalidArgument(
            f"{name} must have {grid.size} time samples, got shape {np.shape(f)}"
        )
    return f


def _as_boundary(bg: BoundaryGrid, F, grid: TimeGrid, name: str) -> np.ndarray:
    F = check_samples(grid, F, name)
    if F.ndim == 1:
        if bg.size != 1:
            raise InvalidArgument(f"{name} is scalar-valued but the boundary has {bg.size} nodes")
        F = F[:, None]
    if F.ndim != 2 or F.shape[1] != bg.size:
        raise InvalidArgument(f"{name} has shape {F.shape}, expected ({grid.size}, {bg.size})")
    return F


def conv(grid: TimeGrid, f, g) -> np.ndarray:
    """Trapezoid approximation of ``(f*g)(t_i) = int_0^t_i f(t_i - s) g(s) ds``.

    ``f`` must be scalar samples; ``g`` may carry trailing axes (e.g. one
    column per boundary node), which are convolved independently.
    """
    f = check_samples(grid, f, "f")
    g = check_samples(grid, g, "g")
    if f.ndim != 1:
        if g.ndim == 1:
            f, g = g, f
        else:
            raise InvalidArgument("at most one convolution factor may be vector-valued")
    n = grid.size
    if g.ndim == 1:
        full = np.convolve(f, g)[:n]
        out = full - 0.5 * (f * g[0] + f[0] * g)
    else:
        flat = g.reshape(n, -1)
        out = np.empty_like(flat)
        for j in range(flat.shape[1]):
            col = flat[:, j]
            out[:, j] = np.convolve(f, col)[:n] - 0.5 * (f * col[0] + f[0] * col)
        out = out.reshape(g.shape)
    out *= grid.dt
    out[0] = 0.0
    return out


def inner_time(grid: TimeGrid, f, g) -> float:
    """Trapezoid approximation of ``int_0^T f g dt``."""
    f = check_samples(grid, f, "f")
    g = check_samples(grid, g, "g")
    if f.shape != g.shape:
        raise InvalidArgument(f"shape mismatch: {f.shape} vs {g.shape}")
    return float(np.tensordot(grid.weights(), f * g, axes=(0, 0)).sum())


def inner_sigma(tg: TimeGrid, bg: BoundaryGrid, F, G) -> float:
    """Tensor-product quadrature of ``int_Sigma F G dSigma`` on ``Gamma x (0, T)``."""
    F = _as_boundary(bg, F, tg, "F")
    G = _as_boundary(bg, G, tg, "G")
    return float(tg.weights() @ (F * G) @ bg.weights)


def oscillatory_hat_integrals(grid: TimeGrid, f, omega: float) -> np.ndarray:
    """Integrals of ``f`` against the piecewise-linear hat functions of the grid.

    On each cell ``f`` is reconstructed from its two end values by the
    interpolant spanned by ``cos(omega t), sin(omega t)``, which is exact for
    harmonic signals of that frequency and reduces to linear interpolation
    as ``omega -> 0``.  Returns ``H`` with ``H_i = int hat_i(t) f(t) dt``;
    dividing by :meth:`TimeGrid.weights` gives the trapezoid-pairing
    representer of ``f`` for piecewise-linear signals.
    """
    f = check_samples(grid, f, "f")
    h = grid.dt
    theta = abs(float(omega)) * h
    if theta >= np.pi:
        raise InvalidArgument(f"omega*dt = {theta:.3g} must stay below pi")
    if theta < 1e-4:
        p = h * (1.0 / 3.0 + theta**2 / 45.0)
        q = h * (1.0 / 6.0 + 7.0 * theta**2 / 360.0)
    else:
        s, c = np.sin(theta), np.cos(theta)
        p = h * (s - theta * c) / (theta**2 * s)
        q = h * (theta - s) / (theta**2 * s)
    H = np.empty_like(f)
    H[0] = p * f[0] + q * f[1]
    H[-1] = q * f[-2] + p * f[-1]
    H[1:-1] = q * f[:-2] + 2.0 * p * f[1:-1] + q * f[2:]
    return H
