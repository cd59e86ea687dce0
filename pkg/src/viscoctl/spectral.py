"""Modal bases of the bilaplacian with boundary trace data.

A :class:`ModalBasis` stores the numbers ``lambda_n`` (the eigenvalue of
``A`` is ``lambda_n**2``) together with the boundary observation
``T phi_n`` sampled on a :class:`~viscoctl.numgrid.BoundaryGrid`, for both
control cases:

* case A (control in the displacement): ``T phi = -gamma_1 Delta phi``
* case B (control in the normal derivative): ``T phi = gamma_0 Delta phi``
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .numgrid import BoundaryGrid, InvalidArgument


class ControlCase(str, enum.Enum):
    A = "A"
    B = "B"

    @classmethod
    def parse(cls, value) -> "ControlCase":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise InvalidArgument(f"case must be 'A' or 'B', got {value!r}")

    @property
    def trace_power(self) -> float:
        """Exponent ``p`` in ``Psi_n = T phi_n / lambda_n**p``."""
        return 1.5 if self is ControlCase.A else 1.0


@dataclass(frozen=True)
class ModalBasis:
    lambdas: np.ndarray
    trace_a: np.ndarray
    trace_b: np.ndarray
    bg: BoundaryGrid
    geometry: str
    labels: tuple = ()

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        if lam.ndim != 1 or lam.size == 0:
            raise InvalidArgument("lambdas must be a non-empty 1-D array")
        if np.any(lam <= 0) or np.any(np.diff(lam) < 0):
            raise InvalidArgument("lambdas must be positive and nondecreasing")
        for name in ("trace_a", "trace_b"):
            tr = np.asarray(getattr(self, name), dtype=float)
            if tr.shape != (lam.size, self.bg.size):
                raise InvalidArgument(f"{name} must have shape {(lam.size, self.bg.size)}, got {tr.shape}")
            tr.setflags(write=False)
            object.__setattr__(self, name, tr)
        lam.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(range(1, lam.size + 1)))

    @property
    def N(self) -> int:
        return self.lambdas.size

    def trace(self, case) -> np.ndarray:
        case = ControlCase.parse(case)
        return self.trace_a if case is ControlCase.A else self.trace_b

    def degenerate(self, case) -> np.ndarray:
        """Modes whose trace vanishes on the boundary grid (invisible to control)."""
        tr = self.trace(case)
        energy = (tr**2) @ self.bg.weights
        scale = energy.max() if energy.max() > 0 else 1.0
        return energy <= 1e-28 * scale

    def truncated(self, n: int) -> "ModalBasis":
        return ModalBasis(
            self.lambdas[:n], self.trace_a[:n], self.trace_b[:n], self.bg,
            self.geometry, self.labels[:n],
        )


def beam_hinged_basis(N: int, bg: BoundaryGrid | None = None) -> ModalBasis:
    """Hinged beam on ``(0, 1)`` observed at ``x = 0``.

    ``phi_n = sqrt(2) sin(n pi x)`` and ``lambda_n = (n pi)**2``.  The
    case-B observation is taken as ``-sqrt(2) (n pi)**2`` (the amplitude of
    ``Delta phi_n``) and the case-A observation as
    ``-phi_n'''(0) = sqrt(2) (n pi)**3``, so ``|Psi_n| = sqrt(2)`` in both
    cases.
    """
    if int(N) != N or N < 1:
        raise InvalidArgument(f"mode count N must be >= 1, got {N!r}")
    bg = bg if bg is not None else BoundaryGrid.point(0.0)
    if bg.size != 1:
        raise InvalidArgument("the beam is observed at a single boundary point")
    k = np.arange(1, N + 1) * np.pi
    lam = k**2
    trace_b = (-np.sqrt(2.0) * k**2)[:, None]
    trace_a = (np.sqrt(2.0) * k**3)[:, None]
    return ModalBasis(lam, trace_a, trace_b, bg, "beam")


def rectangle_hinged_basis(a: float, b: float, N: int, bg: BoundaryGrid) -> ModalBasis:
    """Hinged rectangle ``(0, a) x (0, b)`` controlled on the edge ``y = 0``.

    Modes are ordered by ``lambda_mk = (m pi / a)**2 + (k pi / b)**2`` with
    ties broken by ``(m, k)``.  The case-B trace vanishes for hinged modes.
    """
    if not (a > 0 and b > 0):
        raise InvalidArgument(f"rectangle sides must be positive, got a={a!r}, b={b!r}")
    if int(N) != N or N < 1:
        raise InvalidArgument(f"mode count N must be >= 1, got {N!r}")
    if bg.points.min() < -1e-12 or bg.points.max() > a + 1e-12:
        raise InvalidArgument("boundary nodes must lie on the edge [0, a]")
    # enough candidates: any mode among the first N has m, k <= N
    cand = [
        (((m * np.pi / a) ** 2 + (k * np.pi / b) ** 2), m, k)
        for m in range(1, N + 1)
        for k in range(1, N + 1)
    ]
    cand.sort()
    chosen = cand[:N]
    lam = np.array([c[0] for c in chosen])
    amp = 2.0 / np.sqrt(a * b)
    x = bg.points
    trace_a = np.array(
        [lmk * amp * (k * np.pi / b) * np.sin(m * np.pi * x / a) for lmk, m, k in chosen]
    )
    trace_b = np.zeros_like(trace_a)
    labels = tuple((m, k) for _, m, k in chosen)
    return ModalBasis(lam, trace_a, trace_b, bg, "rectangle", labels)


def synthetic_basis(lambdas, psi_norms) -> ModalBasis:
    """Point-observed basis with prescribed ``lambda_n`` and ``Psi_n``."""
    lam = np.asarray(lambdas, dtype=float)
    psi = np.asarray(psi_norms, dtype=float)
    if lam.shape != psi.shape or lam.ndim != 1:
        raise InvalidArgument("lambda and psi_norms must be 1-D arrays of equal length")
    if np.any(lam <= 0) or np.any(np.diff(lam) < 0):
        raise InvalidArgument("lambda must be positive and nondecreasing")
    bg = BoundaryGrid.point(0.0)
    return ModalBasis(lam, (psi * lam**1.5)[:, None], (psi * lam)[:, None], bg, "synthetic")


@dataclass(frozen=True)
class PsiSequence:
    case: ControlCase
    profiles: np.ndarray  # (N, n_boundary)
    bg: BoundaryGrid

    @property
    def norms(self) -> np.ndarray:
        return np.sqrt((self.profiles**2) @ self.bg.weights)

    @property
    def degenerate(self) -> np.ndarray:
        norms = self.norms
        scale = norms.max() if norms.size and norms.max() > 0 else 1.0
        return norms <= 1e-14 * scale


def psi_sequence(basis: ModalBasis, case) -> PsiSequence:
    case = ControlCase.parse(case)
    scale = basis.lambdas ** case.trace_power
    return PsiSequence(case, basis.trace(case) / scale[:, None], basis.bg)


SPACES = ("Y", "X", "Ytilde")


@dataclass(frozen=True)
class ModalState:
    """Modal coefficients of a position/velocity pair."""

    case: ControlCase
    w: np.ndarray
    wp: np.ndarray
    space: str = "X"

    def __post_init__(self):
        object.__setattr__(self, "case", ControlCase.parse(self.case))
        w = np.atleast_1d(np.asarray(self.w, dtype=float))
        wp = np.atleast_1d(np.asarray(self.wp, dtype=float))
        if w.shape != wp.shape or w.ndim != 1:
            raise InvalidArgument("position and velocity coefficients must have equal length")
        if self.space not in SPACES:
            raise InvalidArgument(f"space must be one of {SPACES}, got {self.space!r}")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "wp", wp)

    @classmethod
    def zeros(cls, case, N: int, space: str = "X") -> "ModalState":
        return cls(case, np.zeros(N), np.zeros(N), space)

    @property
    def N(self) -> int:
        return self.w.size

    def __sub__(self, other: "ModalState") -> "ModalState":
        return ModalState(self.case, self.w - other.w, self.wp - other.wp, self.space)

    def scaled(self, alpha: float) -> "ModalState":
        return ModalState(self.case, alpha * self.w, alpha * self.wp, self.space)


def _weights(lambdas, case, space):
    lam = np.asarray(lambdas, dtype=float)
    if ControlCase.parse(case) is ControlCase.A:
        return (lam**3, lam) if space == "Y" else (lam**-1.0, lam**-3.0)
    return (lam**2, np.ones_like(lam)) if space == "Y" else (np.ones_like(lam), lam**-2.0)


def _norm(state: ModalState, basis: ModalBasis, case, space: str) -> float:
    if state.N != basis.N:
        raise InvalidArgument(f"state has {state.N} modes, basis has {basis.N}")
    ww, wv = _weights(basis.lambdas, case, space)
    return float(np.sqrt(np.sum(ww * state.w**2 + wv * state.wp**2)))


def norm_Y(state: ModalState, basis: ModalBasis, case) -> float:
    """Energy-level norm: case A ``dom A^{3/4} x dom A^{1/4}``, case B ``dom A^{1/2} x L2``."""
    return _norm(state, basis, case, "Y")


def norm_X(state: ModalState, basis: ModalBasis, case) -> float:
    """Norm of the controllability space (dual of the swapped energy space)."""
    return _norm(state, basis, case, "X")


def coeffs_weighted(state: ModalState, lambdas, case=None) -> tuple[np.ndarray, np.ndarray]:
    """``l2`` coordinates of an annihilator candidate ``(xi, eta)``.

    Case A: ``(lambda**1.5 xi, lambda**0.5 eta)``; case B: ``(lambda xi, eta)``.
    """
    case = ControlCase.parse(case if case is not None else state.case)
    lam = np.asarray(lambdas, dtype=float)
    if lam.shape != state.w.shape:
        raise InvalidArgument("lambdas and state have different lengths")
    if case is ControlCase.A:
        return lam**1.5 * state.w, lam**0.5 * state.wp
    return lam * state.w, state.wp.copy()


def coeffs_unweighted(xi_tilde, eta_tilde, lambdas, case) -> ModalState:
    """Inverse of :func:`coeffs_weighted`."""
    case = ControlCase.parse(case)
    lam = np.asarray(lambdas, dtype=float)
    if case is ControlCase.A:
        return ModalState(case, xi_tilde / lam**1.5, eta_tilde / lam**0.5, "Ytilde")
    return ModalState(case, xi_tilde / lam, np.array(eta_tilde, dtype=float), "Ytilde")


def x_coordinates(state: ModalState, lambdas) -> np.ndarray:
    """``l2 x l2`` coordinates in which ``norm_X`` is Euclidean."""
    lam = np.asarray(lambdas, dtype=float)
    p = state.case.trace_power
    return np.concatenate([lam ** (1.0 - p) * state.w, lam ** (-p) * state.wp])


def from_x_coordinates(coords, lambdas, case) -> ModalState:
    case = ControlCase.parse(case)
    lam = np.asarray(lambdas, dtype=float)
    coords = np.asarray(coords, dtype=float)
    N = lam.size
    p = case.trace_power
    return ModalState(case, coords[:N] / lam ** (1.0 - p), coords[N:] / lam ** (-p), "X")
