"""Prony memory kernels, their resolvent, and the MacCamy reformulation.

The viscoelastic plate carries the memory term ``int_0^t M(t-s) A w(s) ds``.
Writing ``R`` for the resolvent kernel (``R + M*R = M``) the equation can be
solved for ``A w``, which after two integrations by parts leaves a memory
acting on ``w`` itself::

    w'' + A w = a w' + b w + K*w + F1,   a = R(0), b = R'(0), K = R''.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .numgrid import InvalidArgument, TimeGrid, check_samples, conv


@dataclass(frozen=True)
class MemoryKernel:
    """``M(t) = sum_i gamma_i exp(-delta_i t)``; an empty sum is the elastic plate."""

    terms: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        terms = []
        for term in self.terms:
            try:
                gamma, delta = (float(v) for v in term)
            except (TypeError, ValueError):
                raise InvalidArgument(f"kernel term must be a (gamma, delta) pair, got {term!r}")
            if not (np.isfinite(gamma) and np.isfinite(delta)):
                raise InvalidArgument(f"kernel term must be finite, got {term!r}")
            if delta < 0:
                raise InvalidArgument(f"decay rate delta must be >= 0, got {delta!r}")
            terms.append((gamma, delta))
        object.__setattr__(self, "terms", tuple(terms))

    @classmethod
    def from_pairs(cls, pairs) -> "MemoryKernel":
        return cls(tuple(tuple(p) for p in pairs))

    @property
    def is_elastic(self) -> bool:
        return all(g == 0.0 for g, _ in self.terms)

    def scaled(self, eps: float) -> "MemoryKernel":
        return MemoryKernel(tuple((eps * g, d) for g, d in self.terms))

    def __call__(self, t, order: int = 0):
        """Evaluate the ``order``-th derivative of ``M`` at ``t``."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for gamma, delta in self.terms:
            out = out + gamma * (-delta) ** order * np.exp(-delta * t)
        return out


def eval_kernel(M: MemoryKernel, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Samples of ``M, M', M''`` on the grid (closed form)."""
    t = grid.nodes
    return M(t, 0), M(t, 1), M(t, 2)


@dataclass(frozen=True)
class ResolventKernel:
    grid: TimeGrid
    R: np.ndarray
    dR: np.ndarray
    d2R: np.ndarray


def solve_volterra2(grid: TimeGrid, kernel, rhs) -> np.ndarray:
    """Solve ``x(t) + int_0^t kernel(t-s) x(s) ds = rhs(t)`` by trapezoid forward substitution."""
    k = check_samples(grid, kernel, "kernel")
    f = check_samples(grid, rhs, "rhs")
    h = grid.dt
    n = grid.size
    x = np.empty(n)
    x[0] = f[0]
    diag = 1.0 + 0.5 * h * k[0]
    if diag == 0.0:
        raise InvalidArgument("trapezoid Volterra step is singular for this kernel and dt")
    for i in range(1, n):
        # k[i-1:0:-1] pairs k_{i-j} with x_j for j = 1..i-1
        hist = 0.5 * k[i] * x[0] + np.dot(k[i - 1:0:-1], x[1:i])
        x[i] = (f[i] - h * hist) / diag
    return x


def resolvent(M: MemoryKernel, grid: TimeGrid) -> ResolventKernel:
    """Resolvent of ``M`` with ``R'`` and ``R''`` from the differentiated identities.

    ``R' = M' - M(0) R - M'*R`` and ``R'' = M'' - M(0) R' - M'(0) R - M''*R``;
    no finite differences are taken.
    """
    m0, m1, m2 = eval_kernel(M, grid)
    R = solve_volterra2(grid, m0, m0)
    dR = m1 - m0[0] * R - conv(grid, m1, R)
    d2R = m2 - m0[0] * dR - m1[0] * R - conv(grid, m2, R)
    return ResolventKernel(grid, R, dR, d2R)


def resolvent_residual(M: MemoryKernel, rk: ResolventKernel) -> np.ndarray:
    """Pointwise residual ``R + M*R - M`` on the grid."""
    m0 = M(rk.grid.nodes)
    return rk.R + conv(rk.grid, m0, rk.R) - m0


@dataclass(frozen=True)
class MacCamyData:
    """Constants of the transformed equation; ``K`` is sampled on ``grid``."""

    a: float
    b: float
    K: np.ndarray
    grid: TimeGrid
    damping_removed: bool = False


def maccamy_data(R: ResolventKernel) -> MacCamyData:
    return MacCamyData(a=float(R.R[0]), b=float(R.dR[0]), K=R.d2R.copy(), grid=R.grid)


class DampingShift(NamedTuple):
    multiplier: np.ndarray
    inverse_multiplier: np.ndarray
    data: MacCamyData


def damping_shift(data: MacCamyData, grid: TimeGrid) -> DampingShift:
    """Remove the ``a w'`` term through ``v = exp(-a t / 2) w``.

    Returns ``exp(-a t_i / 2)``, its reciprocal and the MacCamy data of the
    equation satisfied by ``v``: the substitution leaves ``a = 0`` but also
    moves ``b`` to ``b + a**2 / 4`` and damps the kernel to
    ``exp(-a t / 2) K(t)``.  Controls and forcings are multiplied by the
    multiplier and the initial velocity becomes ``w1 - (a/2) w0``.
    """
    if data.grid != grid:
        raise InvalidArgument("MacCamy data and grid differ")
    if data.damping_removed:
        ones = np.ones(grid.size)
        return DampingShift(ones, ones.copy(), data)
    a = data.a
    mult = np.exp(-0.5 * a * grid.nodes)
    inv = np.exp(0.5 * a * grid.nodes)
    shifted = replace(
        data, a=0.0, b=data.b + 0.25 * a * a, K=mult * data.K, damping_removed=True
    )
    return DampingShift(mult, inv, shifted)


def forcing_f1(
    data: MacCamyData,
    R: ResolventKernel,
    w0_coeff: float,
    w1_coeff: float,
    F,
    grid: TimeGrid,
) -> np.ndarray:
    """``F1 = -R w1 - R' w0 + F - R*F`` for one modal coefficient."""
    if R.grid != grid or data.grid != grid:
        raise InvalidArgument("resolvent, MacCamy data and grid differ")
    F = check_samples(grid, F, "F")
    return -R.R * w1_coeff - R.dR * w0_coeff + F - conv(grid, R.R, F)
