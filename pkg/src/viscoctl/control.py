"""Moment-method control synthesis and reachability diagnostics.

The final state of mode ``n`` driven from rest is a pairing of the control
with a boundary/time function: in the elastic case

    w_n(T)  = -int_Sigma T phi_n sin(l_n (T - s)) / l_n g(x, s) dSigma,
    w_n'(T) = -int_Sigma T phi_n cos(l_n (T - s)) g(x, s) dSigma,

and in the viscoelastic case (after the damping shift) ``sin/l`` and ``cos``
become ``Z_n`` and ``z_n``.  In the ``l2`` coordinates of the controllability
space these pairings are against ``Psi_n l_n Z_n(T - s)`` and
``Psi_n z_n(T - s)``; steering to a target is the moment problem
``<g, f_k> = m_k``, solved here in minimum ``L2(Sigma)`` norm.

Controls are grid samples interpreted as piecewise linear in time.  The
stored moment functions are the representers of the exact pairings for such
controls under the trapezoid inner product, so the Gram matrix and the
simulator see the same control.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .dynamics import (
    ZnSolution,
    elastic_modal_response,
    forward_simulate,
    solve_zn_all,
)
from .kernels import MemoryKernel, damping_shift, maccamy_data, resolvent
from .numgrid import BoundaryGrid, InvalidArgument, TimeGrid, oscillatory_hat_integrals
from .spectral import (
    ControlCase,
    ModalBasis,
    ModalState,
    PsiSequence,
    coeffs_unweighted,
    from_x_coordinates,
    norm_X,
    psi_sequence,
    x_coordinates,
)


class GramDegenerate(np.linalg.LinAlgError):
    """The Gram matrix is singular or indefinite beyond tolerance."""

    def __init__(self, min_eig: float, message: str | None = None):
        self.min_eig = float(min_eig)
        super().__init__(message or f"Gram matrix is degenerate (min eigenvalue {min_eig:.6g})")


@dataclass(frozen=True)
class MomentSystem:
    """``2N`` moment functions ordered ``[Z-type modes 1..N, z-type modes 1..N]``."""

    case: ControlCase
    lambdas: np.ndarray
    functions: np.ndarray  # (2N, n+1, n_boundary)
    gram: np.ndarray
    kind: str
    grid: TimeGrid
    bg: BoundaryGrid
    degenerate: np.ndarray

    @property
    def N(self) -> int:
        return self.lambdas.size


@dataclass(frozen=True)
class ControlFunction:
    grid: TimeGrid
    bg: BoundaryGrid
    values: np.ndarray  # (n+1, n_boundary)
    coefficients: np.ndarray

    @property
    def norm(self) -> float:
        w = np.outer(self.grid.weights(), self.bg.weights)
        return float(np.sqrt(np.sum(w * self.values**2)))


@dataclass(frozen=True)
class ReachReport:
    target: ModalState
    achieved: ModalState
    residual_abs: float
    residual_rel: float
    control_norm: float
    gram_condition: float

    def rows(self) -> list[tuple[str, float]]:
        rows = [
            ("residual_abs", self.residual_abs),
            ("residual_rel", self.residual_rel),
            ("control_norm", self.control_norm),
            ("gram_condition", self.gram_condition),
        ]
        for n in range(self.target.N):
            rows += [
                (f"target_w_{n + 1}", self.target.w[n]),
                (f"target_wp_{n + 1}", self.target.wp[n]),
                (f"achieved_w_{n + 1}", self.achieved.w[n]),
                (f"achieved_wp_{n + 1}", self.achieved.wp[n]),
            ]
        return rows


def _representer(grid: TimeGrid, samples: np.ndarray, omega: float) -> np.ndarray:
    return oscillatory_hat_integrals(grid, samples, omega) / grid.weights()


def gram_matrix(functions: np.ndarray, grid: TimeGrid, bg: BoundaryGrid) -> np.ndarray:
    """All pairwise ``inner_sigma`` products of the moment functions."""
    wf = functions * grid.weights()[None, :, None] * bg.weights[None, None, :]
    K = functions.shape[0]
    G = wf.reshape(K, -1) @ functions.reshape(K, -1).T
    return 0.5 * (G + G.T)


def _assemble(case, lambdas, psi: PsiSequence, profiles_Z, profiles_z, omegas, grid, bg, kind):
    N = lambdas.size
    functions = np.empty((2 * N, grid.size, bg.size))
    for n in range(N):
        rz = _representer(grid, profiles_Z[n], omegas[n])
        rc = _representer(grid, profiles_z[n], omegas[n])
        functions[n] = np.outer(rz, psi.profiles[n])
        functions[N + n] = np.outer(rc, psi.profiles[n])
    gram = gram_matrix(functions, grid, bg)
    return MomentSystem(
        ControlCase.parse(case), np.asarray(lambdas, dtype=float).copy(), functions, gram,
        kind, grid, bg, psi.degenerate,
    )


def elastic_moment_functions(
    basis: ModalBasis, case, psi: PsiSequence | None, grid: TimeGrid, bg: BoundaryGrid | None = None
) -> MomentSystem:
    """``Psi_n sin(l_n (T - s))`` and ``Psi_n cos(l_n (T - s))`` with their Gram matrix."""
    bg = bg if bg is not None else basis.bg
    psi = psi if psi is not None else psi_sequence(basis, case)
    rev = grid.T - grid.nodes
    lam = basis.lambdas
    sines = np.sin(np.outer(lam, rev))
    cosines = np.cos(np.outer(lam, rev))
    return _assemble(case, lam, psi, sines, cosines, lam, grid, bg, "elastic")


def visco_moment_functions(
    basis: ModalBasis,
    case,
    psi: PsiSequence | None,
    zset: list[ZnSolution],
    grid: TimeGrid,
    bg: BoundaryGrid | None = None,
) -> MomentSystem:
    """``Psi_n l_n Z_n(T - s)`` and ``Psi_n z_n(T - s)`` with their Gram matrix.

    ``zset`` must come from damping-shifted MacCamy data.
    """
    bg = bg if bg is not None else basis.bg
    psi = psi if psi is not None else psi_sequence(basis, case)
    if len(zset) != basis.N:
        raise InvalidArgument(f"{len(zset)} z_n solutions for {basis.N} modes")
    for zn in zset:
        if zn.grid != grid:
            raise InvalidArgument("z_n solutions live on a different grid")
    lam = basis.lambdas
    big_z = np.stack([lam[n] * zset[n].Z[::-1] for n in range(basis.N)])
    small_z = np.stack([zn.z[::-1] for zn in zset])
    omegas = np.array([zn.omega for zn in zset])
    return _assemble(case, lam, psi, big_z, small_z, omegas, grid, bg, "visco")


def target_moments(basis: ModalBasis, case, target: ModalState) -> np.ndarray:
    """Moment vector for steering from rest to ``target``.

    ``m = -(l**(1-p) w, l**(-p) w')`` with ``p = 3/2`` (case A) or ``1``
    (case B): minus the ``l2`` coordinates of the target.
    """
    case = ControlCase.parse(case)
    if target.N != basis.N:
        raise InvalidArgument(f"target has {target.N} modes, basis has {basis.N}")
    state = ModalState(case, target.w, target.wp, target.space)
    return -x_coordinates(state, basis.lambdas)


def _min_eig(G: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(G)[0])


def gram_condition(G: np.ndarray) -> float:
    eig = np.linalg.eigvalsh(G)
    return float(eig[-1] / eig[0]) if eig[0] > 0 else float("inf")


def synthesize_control(ms: MomentSystem, m) -> ControlFunction:
    """Minimum-norm control ``g = sum_k c_k f_k`` with ``G c = m``.

    Cholesky solve with no regularisation; a Gram matrix that is not
    numerically positive definite raises :class:`GramDegenerate`.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (ms.gram.shape[0],):
        raise InvalidArgument(f"moment vector must have length {ms.gram.shape[0]}")
    G = ms.gram
    eig = np.linalg.eigvalsh(G)
    if eig[0] <= 1e-14 * max(eig[-1], 0.0) * G.shape[0] or eig[-1] <= 0:
        raise GramDegenerate(eig[0])
    try:
        c = linalg.cho_solve(linalg.cho_factor(G), m)
    except linalg.LinAlgError:
        raise GramDegenerate(eig[0])
    values = np.tensordot(c, ms.functions, axes=(0, 0))
    return ControlFunction(ms.grid, ms.bg, values, c)


def reach_elastic(basis: ModalBasis, case, g, grid: TimeGrid, bg: BoundaryGrid | None = None) -> ModalState:
    """``Lambda_T g``: final state of the elastic plate started at rest."""
    bg = bg if bg is not None else basis.bg
    trace = basis.trace(case)
    vals = np.array(
        [elastic_modal_response(lam, trace[n], g, grid, bg) for n, lam in enumerate(basis.lambdas)]
    )
    return ModalState(case, vals[:, 0], vals[:, 1], "X")


def reach_visco(
    basis: ModalBasis, M: MemoryKernel, case, g, grid: TimeGrid, bg: BoundaryGrid | None = None
) -> ModalState:
    """``Lambda_T^V g`` by simulation of the raw viscoelastic equation."""
    traj = forward_simulate(basis, M, case, g, None, grid, bg)
    return traj.final_state(case)


def _values(g) -> np.ndarray:
    return g.values if isinstance(g, ControlFunction) else np.asarray(g, dtype=float)


def reach_report(basis: ModalBasis, case, target: ModalState, achieved: ModalState,
                 control: ControlFunction, gram: np.ndarray) -> ReachReport:
    err = norm_X(achieved - target, basis, case)
    ref = norm_X(target, basis, case)
    return ReachReport(
        target, achieved, err, err / ref if ref > 0 else err, control.norm, gram_condition(gram)
    )


@dataclass(frozen=True)
class SteeringResult:
    control: ControlFunction
    moments: MomentSystem
    report: ReachReport


def steer(
    basis: ModalBasis,
    case,
    target: ModalState,
    grid: TimeGrid,
    M: MemoryKernel | None = None,
    bg: BoundaryGrid | None = None,
    visco: bool | None = None,
) -> SteeringResult:
    """Synthesize a control reaching ``target`` from rest and verify it by simulation.

    ``visco=None`` picks the elastic moment problem exactly when ``M`` is
    zero; ``visco=True`` forces the memory-kernel route even then.

    With a nonzero kernel the moment problem is posed for the damped
    variable ``v = exp(-aT/2) w``; the target is shifted accordingly and the
    synthesized control is multiplied by ``exp(a t / 2)``.  Verification
    always uses the raw viscoelastic simulator.
    """
    case = ControlCase.parse(case)
    bg = bg if bg is not None else basis.bg
    M = M if M is not None else MemoryKernel()
    psi = psi_sequence(basis, case)
    if visco is None:
        visco = not M.is_elastic
    if not visco:
        if not M.is_elastic:
            raise InvalidArgument("the elastic route needs a zero memory kernel")
        ms = elastic_moment_functions(basis, case, psi, grid, bg)
        control = synthesize_control(ms, target_moments(basis, case, target))
        achieved = reach_elastic(basis, case, control.values, grid, bg)
    else:
        mc = maccamy_data(resolvent(M, grid))
        shift = damping_shift(mc, grid)
        zset = solve_zn_all(shift.data, basis.lambdas, grid)
        ms = visco_moment_functions(basis, case, psi, zset, grid, bg)
        a, T = mc.a, grid.T
        decay = np.exp(-0.5 * a * T)
        shifted = ModalState(case, decay * target.w, decay * (target.wp - 0.5 * a * target.w))
        h = synthesize_control(ms, target_moments(basis, case, shifted))
        control = ControlFunction(grid, bg, shift.inverse_multiplier[:, None] * h.values, h.coefficients)
        achieved = reach_visco(basis, M, case, control.values, grid, bg)
    report = reach_report(basis, case, target, achieved, control, ms.gram)
    return SteeringResult(control, ms, report)


def predicted_state(ms: MomentSystem, g) -> ModalState:
    """Final state implied by pairing ``g`` with the moment functions (no simulation)."""
    vals = _values(g)
    if vals.ndim == 1:
        vals = vals[:, None]
    w = np.outer(ms.grid.weights(), ms.bg.weights)
    pairings = np.tensordot(ms.functions, w * vals, axes=([1, 2], [0, 1]))
    return from_x_coordinates(-pairings, ms.lambdas, ms.case)


def shifted_reach_visco(basis, M, case, h, grid, bg, a):
    """Final state of ``v = exp(-at/2) w`` for the shifted control ``h``."""
    g = np.exp(0.5 * a * grid.nodes)[:, None] * h
    fin = reach_visco(basis, M, case, g, grid, bg)
    decay = np.exp(-0.5 * a * grid.T)
    return ModalState(case, decay * fin.w, decay * (fin.wp - 0.5 * a * fin.w))


def compactness_diagnostic(
    basis: ModalBasis,
    M: MemoryKernel,
    case,
    grid: TimeGrid,
    bg: BoundaryGrid | None = None,
    probe_count: int = 0,
    seed: int = 42,
) -> np.ndarray:
    """Singular values of the discretized ``Lambda_T^V - Lambda_T``.

    Both maps are compared after the damping shift (the shifted viscoelastic
    map is computed from the raw simulator), in ``l2`` coordinates, on an
    ``L2(Sigma)``-orthonormal set of probes: the elastic moment functions
    when ``probe_count`` is 0, otherwise that many seeded random controls.
    """
    case = ControlCase.parse(case)
    bg = bg if bg is not None else basis.bg
    a = float(M(0.0)) if not M.is_elastic else 0.0
    if probe_count and probe_count > 0:
        rng = np.random.default_rng(seed)
        probes = rng.standard_normal((probe_count, grid.size, bg.size))
        gram = gram_matrix(probes, grid, bg)
    else:
        ms = elastic_moment_functions(basis, case, None, grid, bg)
        probes, gram = ms.functions, ms.gram
    eig, vec = np.linalg.eigh(gram)
    keep = eig > 1e-12 * eig[-1]
    basis_change = vec[:, keep] / np.sqrt(eig[keep])
    ortho = np.tensordot(basis_change.T, probes, axes=(1, 0))
    cols = []
    for h in ortho:
        el = reach_elastic(basis, case, h, grid, bg)
        vi = shifted_reach_visco(basis, M, case, h, grid, bg, a) if not M.is_elastic else \
            reach_visco(basis, M, case, h, grid, bg)
        cols.append(x_coordinates(vi, basis.lambdas) - x_coordinates(el, basis.lambdas))
    D = np.column_stack(cols)
    return np.linalg.svd(D, compute_uv=False)


@dataclass(frozen=True)
class AnnihilatorResult:
    min_eig: float
    threshold: float
    witness: ModalState | None


def annihilator_diagnostic(ms: MomentSystem) -> AnnihilatorResult:
    """Smallest Gram eigenvalue and, if it is numerically zero, an annihilator.

    A null vector ``c = (eta_tilde, xi_tilde)`` of the Gram matrix makes
    ``sum_n Psi_n [xi_tilde_n z_n + eta_tilde_n l_n Z_n]`` vanish on Sigma; the
    witness is the adjoint initial state ``(xi, eta)`` recovered from it.
    """
    G = ms.gram
    n = G.shape[0]
    eig, vec = np.linalg.eigh(G)
    threshold = 1e-10 * np.trace(G) / n
    if eig[0] > threshold:
        return AnnihilatorResult(float(eig[0]), float(threshold), None)
    c = vec[:, 0]
    c = c / c[np.argmax(np.abs(c))]
    N = ms.N
    witness = coeffs_unweighted(c[N:], c[:N], ms.lambdas, ms.case)
    return AnnihilatorResult(float(eig[0]), float(threshold), witness)
