import numpy as np
import pytest

from viscoctl.kernels import (
    MemoryKernel,
    damping_shift,
    eval_kernel,
    forcing_f1,
    maccamy_data,
    resolvent,
    resolvent_residual,
    solve_volterra2,
)
from viscoctl.numgrid import InvalidArgument, make_time_grid


def single(gamma, delta):
    return MemoryKernel.from_pairs([[gamma, delta]])


def test_eval_kernel_examples():
    g = make_time_grid(1.0, 10)
    m0, m1, m2 = eval_kernel(single(1, 0), g)
    np.testing.assert_array_equal(m0, 1.0)
    np.testing.assert_array_equal(m1, 0.0)
    np.testing.assert_array_equal(m2, 0.0)
    assert all(not np.any(x) for x in eval_kernel(MemoryKernel(), g))
    m0, m1, m2 = eval_kernel(single(0.5, 1), g)
    assert (m0[0], m1[0], m2[0]) == (0.5, -0.5, 0.5)


def test_kernel_validation():
    with pytest.raises(InvalidArgument):
        single(1.0, -1.0)
    with pytest.raises(InvalidArgument):
        MemoryKernel.from_pairs([[1.0]])
    with pytest.raises(InvalidArgument):
        single(np.nan, 1.0)
    assert MemoryKernel().is_elastic
    assert single(0.0, 3.0).is_elastic


def test_volterra_solver_exponential():
    # x + int_0^t x = 1 has x = exp(-t)
    g = make_time_grid(1.0, 1000)
    x = solve_volterra2(g, np.ones(g.size), np.ones(g.size))
    assert np.abs(x - np.exp(-g.nodes)).max() < 1e-6


@pytest.mark.parametrize("gamma,delta", [(1.0, 0.0), (0.5, 1.0), (-0.3, 2.0)])
def test_resolvent_single_term(gamma, delta):
    g = make_time_grid(2.0, 2000)
    rk = resolvent(single(gamma, delta), g)
    rate = gamma + delta
    exact = gamma * np.exp(-rate * g.nodes)
    assert np.abs(rk.R - exact).max() <= 1e-6
    assert np.abs(rk.dR + rate * exact).max() <= 1e-6
    assert np.abs(rk.d2R - rate**2 * exact).max() <= 1e-5


def test_resolvent_of_zero_kernel():
    rk = resolvent(MemoryKernel(), make_time_grid(1.0, 10))
    assert not np.any(rk.R) and not np.any(rk.dR) and not np.any(rk.d2R)


def test_resolvent_two_term_against_laplace_oracle():
    # M = sum g_i/(s+d_i) gives R = M/(1+M), a rational function with two real poles
    M = MemoryKernel.from_pairs([[0.4, 1.0], [0.3, 3.0]])
    (g1, d1), (g2, d2) = M.terms
    num = np.polymul([g1], [1, d2]) + np.polymul([g2], [1, d1])
    den = np.polyadd(np.polymul([1, d1], [1, d2]), num)
    poles = np.roots(den)
    res = [np.polyval(num, p) / np.polyval(np.polyder(den), p) for p in poles]
    g = make_time_grid(2.0, 2000)
    exact = sum(r * np.exp(p * g.nodes) for r, p in zip(res, poles)).real
    rk = resolvent(M, g)
    assert np.abs(rk.R - exact).max() < 1e-6


def test_resolvent_residual_second_order():
    M = single(0.5, 1.0)
    norms = []
    for n in (200, 400):
        g = make_time_grid(2.0, n)
        exact = 0.5 * np.exp(-1.5 * g.nodes)
        norms.append(np.abs(resolvent(M, g).R - exact).max())
        assert np.abs(resolvent_residual(M, resolvent(M, g))).max() < 1e-12
    assert np.log2(norms[0] / norms[1]) >= 1.9


@pytest.mark.parametrize("eps", [1e-2, 1e-3])
def test_resolvent_small_kernel(eps):
    g = make_time_grid(2.0, 2000)
    R = resolvent(single(eps, 1.0), g).R
    assert np.abs(R).max() <= 1.1 * eps * 1.0


@pytest.mark.parametrize(
    "pairs,a,b,K",
    [
        ([[0.5, 1.0]], 0.5, -0.75, lambda t: 1.125 * np.exp(-1.5 * t)),
        ([], 0.0, 0.0, lambda t: 0 * t),
        ([[1.0, 0.0]], 1.0, -1.0, lambda t: np.exp(-t)),
    ],
)
def test_maccamy_constants(pairs, a, b, K):
    g = make_time_grid(2.0, 2000)
    mc = maccamy_data(resolvent(MemoryKernel.from_pairs(pairs), g))
    assert mc.a == pytest.approx(a, abs=1e-9)
    assert mc.b == pytest.approx(b, abs=1e-6)
    assert np.abs(mc.K - K(g.nodes)).max() <= 1e-5


def test_damping_shift():
    g = make_time_grid(2.0, 2)
    mc = maccamy_data(resolvent(MemoryKernel(), g))
    sh = damping_shift(mc, g)
    np.testing.assert_array_equal(sh.multiplier, 1.0)
    g = make_time_grid(2.0, 2000)
    mc = maccamy_data(resolvent(single(1.0, 0.0), g))
    sh = damping_shift(mc, g)
    assert sh.multiplier[-1] == pytest.approx(np.exp(-1.0), rel=1e-9)
    np.testing.assert_allclose(sh.multiplier * sh.inverse_multiplier, 1.0)
    assert sh.data.a == 0.0 and sh.data.damping_removed
    assert sh.data.b == pytest.approx(mc.b + mc.a**2 / 4)
    # already shifted data is left alone
    again = damping_shift(sh.data, g)
    assert again.data is sh.data


def test_forcing_f1():
    g = make_time_grid(1.0, 1000)
    M = single(0.5, 1.0)
    rk = resolvent(M, g)
    mc = maccamy_data(rk)
    zero = np.zeros(g.size)
    assert not np.any(forcing_f1(mc, rk, 0.0, 0.0, zero, g))
    np.testing.assert_allclose(forcing_f1(mc, rk, 0.0, 1.0, zero, g), -0.5 * np.exp(-1.5 * g.nodes), atol=1e-6)
    rk0 = resolvent(MemoryKernel(), g)
    F = np.sin(g.nodes)
    np.testing.assert_array_equal(forcing_f1(maccamy_data(rk0), rk0, 1.0, 2.0, F, g), F)
    with pytest.raises(InvalidArgument):
        forcing_f1(mc, rk, 0.0, 0.0, zero, make_time_grid(1.0, 999))
