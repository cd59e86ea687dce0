"""Modal time evolution of the elastic and viscoelastic plate.

Two independent routes are provided:

* the raw equation ``w'' + A w + M*(A w) = 0`` with the boundary control
  entering every mode through ``B_n(t) = int_Gamma T phi_n g dGamma``, which
  :func:`forward_simulate` integrates exactly for piecewise-linear controls
  by carrying one internal variable per Prony term;
* the transformed equation ``z'' = -lambda**2 z + b z + K*z`` of
  :func:`solve_zn`, built from the numerically computed resolvent.

Agreement of the two is the main end-to-end check of the kernel machinery.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .kernels import (
    MacCamyData,
    MemoryKernel,
    damping_shift,
    forcing_f1,
    maccamy_data,
    resolvent,
)
from .numgrid import (
    BoundaryGrid,
    InvalidArgument,
    TimeGrid,
    check_samples,
    conv,
    inner_sigma,
    oscillatory_hat_integrals,
)
from .spectral import ControlCase, ModalBasis, ModalState, norm_Y

WARN_LIMIT = 1.0
REFUSE_LIMIT = 2.0


class StabilityError(RuntimeError):
    """``lambda * dt`` exceeds the admissible step-size limit."""


def check_step(lambda_max: float, grid: TimeGrid) -> None:
    ratio = float(lambda_max) * grid.dt
    if ratio > REFUSE_LIMIT:
        raise StabilityError(
            f"lambda_max*dt = {ratio:.4g} exceeds {REFUSE_LIMIT}; increase n_steps"
        )
    if ratio > WARN_LIMIT:
        warnings.warn(f"lambda_max*dt = {ratio:.4g} > {WARN_LIMIT}; accuracy degrades", RuntimeWarning)


@dataclass(frozen=True)
class ZnSolution:
    """Memory-perturbed cosine ``z_n`` with its derivative and primitive."""

    n: int
    lam: float
    omega: float
    grid: TimeGrid
    z: np.ndarray
    dz: np.ndarray
    Z: np.ndarray


def _start_weights(omega: np.ndarray, h: float):
    theta = omega * h
    small = theta < 1e-3
    th = np.where(small, 1.0, theta)
    om = np.where(small, 1.0, omega)
    a1 = (th - np.sin(th)) / (om**3 * h)
    a0 = (1.0 - np.cos(th)) / om**2 - a1
    a1 = np.where(small, h * h * (1.0 / 6.0 - theta**2 / 120.0), a1)
    a0 = np.where(small, h * h * (1.0 / 3.0 - theta**2 / 30.0), a0)
    return a0, a1


def oscillator_solve(omega, K, grid: TimeGrid, y0, v0, forcing=None) -> np.ndarray:
    """Solve ``y'' + omega**2 y = K*y + f`` for a batch of frequencies.

    Two-step trigonometric scheme: exact for the free oscillator, second
    order in the memory and forcing terms, which are sampled at the centre
    node and filtered by ``sinc(omega dt / 2)**2``.  The memory integral is
    the trapezoid rule over the stored history.  Returns ``(len(omega), n+1)``.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    n_modes = omega.size
    K = check_samples(grid, K, "K")
    h = grid.dt
    n = grid.size
    y0 = np.broadcast_to(np.asarray(y0, dtype=float), (n_modes,))
    v0 = np.broadcast_to(np.asarray(v0, dtype=float), (n_modes,))
    f = np.zeros((n_modes, n)) if forcing is None else np.broadcast_to(forcing, (n_modes, n))
    memory = bool(np.any(K != 0.0))

    c = np.cos(omega * h)
    s_over_w = np.sin(omega * h) / omega
    gain = 2.0 * (1.0 - c) / omega**2
    a0, a1 = _start_weights(omega, h)

    y = np.empty((n_modes, n))
    y[:, 0] = y0
    rhs = c * y0 + s_over_w * v0 + a0 * f[:, 0] + a1 * (f[:, 1] + 0.5 * h * K[1] * y0)
    y[:, 1] = rhs / (1.0 - 0.5 * h * a1 * K[0])
    for k in range(1, n - 1):
        q = f[:, k]
        if memory:
            mem = y[:, : k + 1] @ K[k::-1] - 0.5 * (K[k] * y[:, 0] + K[0] * y[:, k])
            q = q + h * mem
        y[:, k + 1] = 2.0 * c * y[:, k] - y[:, k - 1] + gain * q
    return y


def _frequencies(mc: MacCamyData, lambdas) -> np.ndarray:
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
    om2 = lam**2 - mc.b
    if np.any(om2 <= 0):
        raise InvalidArgument("lambda**2 - b must be positive for every mode")
    return np.sqrt(om2)


def solve_zn_all(mc: MacCamyData, lambdas, grid: TimeGrid) -> list[ZnSolution]:
    """:func:`solve_zn` for every entry of ``lambdas`` (vectorised)."""
    if not mc.damping_removed and mc.a != 0.0:
        raise InvalidArgument("apply damping_shift first: z_n assumes a = 0")
    if mc.grid != grid:
        raise InvalidArgument("MacCamy data and grid differ")
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
    check_step(lam.max(), grid)
    omega = _frequencies(mc, lam)
    z = oscillator_solve(omega, mc.K, grid, 1.0, 0.0)
    Z = oscillator_solve(omega, mc.K, grid, 0.0, 1.0)
    dz = -(omega**2)[:, None] * Z
    if np.any(mc.K != 0.0):
        dz += conv(grid, mc.K, Z.T).T
    return [
        ZnSolution(i + 1, float(lam[i]), float(omega[i]), grid, z[i], dz[i], Z[i])
        for i in range(lam.size)
    ]


def solve_zn(mc: MacCamyData, lambda_n: float, grid: TimeGrid, n: int = 1) -> ZnSolution:
    """``z'' = -lambda**2 z + b z + K*z``, ``z(0) = 1``, ``z'(0) = 0``.

    ``Z = int_0^t z`` solves the same equation with ``Z(0) = 0, Z'(0) = 1``
    and is integrated alongside; ``z'`` then follows from the integrated
    equation ``z' = (b - lambda**2) Z + K*Z``.
    """
    sol = solve_zn_all(mc, [lambda_n], grid)[0]
    return ZnSolution(n, sol.lam, sol.omega, grid, sol.z, sol.dz, sol.Z)


@dataclass(frozen=True)
class VolterraResidual:
    z_line: float
    Z_line: float
    Z_line_printed: float


def zn_volterra_residual(zs: ZnSolution, mc: MacCamyData, grid: TimeGrid) -> VolterraResidual:
    """Check ``z_n`` and ``int z_n`` against their Volterra representations.

    ``z = cos(lt) + (b/l) sin(l.)*z + (1/l) (sin(l.)*K)*z`` and
    ``int z = sin(lt)/l + (b/l**2) (1-cos(l.))*z + (1/l**2) (1-cos(l.))*(K*z)``.
    ``Z_line_printed`` uses the opposite sign on all three terms of the second
    line, i.e. the expansion of ``-int z``; its residual is O(1).
    """
    lam = zs.lam
    t = grid.nodes
    sin_l = np.sin(lam * t)
    one_m_cos = 1.0 - np.cos(lam * t)
    sk = conv(grid, sin_l, mc.K)
    z_rhs = np.cos(lam * t) + (mc.b / lam) * conv(grid, sin_l, zs.z) + conv(grid, sk, zs.z) / lam
    corr = (mc.b / lam**2) * conv(grid, one_m_cos, zs.z)
    corr += conv(grid, one_m_cos, conv(grid, mc.K, zs.z)) / lam**2
    Z_rhs = sin_l / lam + corr
    Z_printed = -sin_l / lam - corr
    return VolterraResidual(
        z_line=float(np.max(np.abs(zs.z - z_rhs))),
        Z_line=float(np.max(np.abs(zs.Z - Z_rhs))),
        Z_line_printed=float(np.max(np.abs(zs.Z - Z_printed))),
    )


def boundary_input(trace: np.ndarray, g, grid: TimeGrid, bg: BoundaryGrid) -> np.ndarray:
    """``B_n(t_i) = int_Gamma T phi_n g(., t_i) dGamma`` as an ``(n+1, N)`` array."""
    g = check_samples(grid, g, "g")
    if g.ndim == 1:
        g = g[:, None]
    if g.shape[1] != bg.size:
        raise InvalidArgument(f"control has {g.shape[1]} boundary columns, grid has {bg.size}")
    trace = np.atleast_2d(trace)
    return (g * bg.weights) @ trace.T


def elastic_modal_response(lambda_n: float, trace_profile, g, grid: TimeGrid, bg: BoundaryGrid):
    """Final modal state of the elastic plate driven from rest by ``g``.

    ``u_n(T) = -int_Sigma g(x, T-s) sin(l s)/l T phi_n dSigma`` and
    ``u_n'(T) = -int_Sigma g(x, T-s) cos(l s) T phi_n dSigma``, integrated
    exactly for ``g`` piecewise linear in time.
    """
    B = boundary_input(np.asarray(trace_profile, dtype=float)[None, :], g, grid, bg)[:, 0]
    rev = grid.T - grid.nodes
    hs = oscillatory_hat_integrals(grid, np.sin(lambda_n * rev), lambda_n)
    hc = oscillatory_hat_integrals(grid, np.cos(lambda_n * rev), lambda_n)
    return -float(B @ hs) / lambda_n, -float(B @ hc)


@dataclass(frozen=True)
class ModalTrajectory:
    grid: TimeGrid
    lambdas: np.ndarray
    w: np.ndarray  # (n+1, N)
    wp: np.ndarray  # (n+1, N)

    @property
    def energy(self) -> np.ndarray:
        return np.sum(self.wp**2 + self.lambdas**2 * self.w**2, axis=1)

    def final_state(self, case) -> ModalState:
        return ModalState(case, self.w[-1].copy(), self.wp[-1].copy(), "X")

    def table(self) -> tuple[list[str], np.ndarray]:
        """Columns ``t, w_1, w_1', ..., w_N, w_N', energy``."""
        N = self.lambdas.size
        cols = ["t"]
        data = [self.grid.nodes]
        for n in range(N):
            cols += [f"w_{n + 1}", f"w_{n + 1}'"]
            data += [self.w[:, n], self.wp[:, n]]
        cols.append("energy")
        data.append(self.energy)
        return cols, np.column_stack(data)


def _raw_propagators(lam: float, M: MemoryKernel, h: float):
    """One-step maps of the scaled Prony state ``(l w, w', y_i / l)``.

    ``y_i = int_0^t exp(-delta_i (t-s)) (l**2 w + B)(s) ds`` carries the memory.
    The input ``B`` is linear on each step, so the step is exact.
    """
    terms = [(g, d) for g, d in M.terms if g != 0.0]
    p = len(terms)
    d = 2 + p
    A = np.zeros((d + 2, d + 2))
    A[0, 1] = lam
    A[1, 0] = -lam
    for i, (gamma, delta) in enumerate(terms):
        A[1, 2 + i] = -lam * gamma
        A[2 + i, 0] = 1.0
        A[2 + i, 2 + i] = -delta
    e = np.zeros(d)
    e[1] = -1.0
    e[2:] = 1.0 / lam
    A[:d, d] = e
    A[d, d + 1] = 1.0
    E = expm(A * h)
    return E[:d, :d], E[:d, d], E[:d, d + 1]


def forward_simulate(
    basis: ModalBasis,
    M: MemoryKernel,
    case,
    g,
    initial: ModalState | None,
    grid: TimeGrid,
    bg: BoundaryGrid | None = None,
) -> ModalTrajectory:
    """Integrate ``w_n'' = -P_n - M*P_n`` with ``P_n = lambda_n**2 w_n + B_n``.

    ``g`` holds control samples, shape ``(n+1,)`` or ``(n+1, n_boundary)``;
    between nodes it is taken piecewise linear.
    """
    case = ControlCase.parse(case)
    bg = bg if bg is not None else basis.bg
    check_step(basis.lambdas.max(), grid)
    N = basis.N
    if initial is None:
        initial = ModalState.zeros(case, N)
    if initial.N != N:
        raise InvalidArgument(f"initial state has {initial.N} modes, basis has {N}")
    B = boundary_input(basis.trace(case), g, grid, bg)
    h = grid.dt
    p = sum(1 for gam, _ in M.terms if gam != 0.0)
    d = 2 + p
    Phi = np.empty((N, d, d))
    G0 = np.empty((N, d))
    G1 = np.empty((N, d))
    for n, lam in enumerate(basis.lambdas):
        Phi[n], G0[n], G1[n] = _raw_propagators(lam, M, h)
    lam = basis.lambdas
    x = np.zeros((N, d))
    x[:, 0] = lam * initial.w
    x[:, 1] = initial.wp
    w = np.empty((grid.size, N))
    wp = np.empty((grid.size, N))
    w[0], wp[0] = initial.w, initial.wp
    slope = np.diff(B, axis=0) / h
    for k in range(grid.n_steps):
        x = np.einsum("nij,nj->ni", Phi, x) + G0 * B[k][:, None] + G1 * slope[k][:, None]
        w[k + 1] = x[:, 0] / lam
        wp[k + 1] = x[:, 1]
    return ModalTrajectory(grid, lam.copy(), w, wp)


def maccamy_trajectory(
    basis: ModalBasis, M: MemoryKernel, initial: ModalState, grid: TimeGrid
) -> ModalTrajectory:
    """Uncontrolled trajectory rebuilt from the transformed equation.

    Per mode: ``v = v0 z + v1 Z + Z*(e^{-at/2} F1)`` with ``v0 = w0``,
    ``v1 = w1 - (a/2) w0`` and ``w = e^{at/2} v``.
    """
    rk = resolvent(M, grid)
    mc = maccamy_data(rk)
    shift = damping_shift(mc, grid)
    zs = solve_zn_all(shift.data, basis.lambdas, grid)
    a = mc.a
    zero = np.zeros(grid.size)
    w = np.empty((grid.size, basis.N))
    wp = np.empty((grid.size, basis.N))
    for n, zn in enumerate(zs):
        w0, w1 = initial.w[n], initial.wp[n]
        f1 = shift.multiplier * forcing_f1(mc, rk, w0, w1, zero, grid)
        v0, v1 = w0, w1 - 0.5 * a * w0
        v = v0 * zn.z + v1 * zn.Z + conv(grid, zn.Z, f1)
        vp = v0 * zn.dz + v1 * zn.z + conv(grid, zn.z, f1)
        w[:, n] = shift.inverse_multiplier * v
        wp[:, n] = shift.inverse_multiplier * (vp + 0.5 * a * v)
    return ModalTrajectory(grid, basis.lambdas.copy(), w, wp)


def adjoint_trace(
    basis: ModalBasis, case, xi, eta, zset, bg: BoundaryGrid, grid: TimeGrid
) -> np.ndarray:
    """``T psi(x, t) = sum_n T phi_n(x) [xi_n z_n(t) + eta_n Z_n(t)]``, shape ``(n+1, n_boundary)``."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    if not (xi.size == eta.size == basis.N == len(zset)):
        raise InvalidArgument("xi, eta, zset and basis must cover the same modes")
    if bg.size != basis.bg.size:
        raise InvalidArgument("boundary grid does not match the basis")
    for zn in zset:
        if zn.grid != grid:
            raise InvalidArgument("z_n solutions live on a different grid")
    z = np.stack([zn.z for zn in zset])
    Z = np.stack([zn.Z for zn in zset])
    psi_t = xi[:, None] * z + eta[:, None] * Z  # (N, n+1)
    return psi_t.T @ basis.trace(case)


def trace_energy_ratios(
    basis: ModalBasis, case, zset, grid: TimeGrid, n_samples: int = 50, seed: int = 42
) -> np.ndarray:
    """``int_Sigma |T psi|**2 / ||(xi, eta)||_Y**2`` for random adjoint data."""
    rng = np.random.default_rng(seed)
    out = np.empty(n_samples)
    for i in range(n_samples):
        xi, eta = rng.standard_normal((2, basis.N))
        state = ModalState(case, xi, eta, "Y")
        scale = norm_Y(state, basis, case)
        state = state.scaled(1.0 / scale)
        tr = adjoint_trace(basis, case, state.w, state.wp, zset, basis.bg, grid)
        out[i] = inner_sigma(grid, basis.bg, tr, tr)
    return out
