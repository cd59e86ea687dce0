import numpy as np
import pytest

from viscoctl.control import (
    GramDegenerate,
    annihilator_diagnostic,
    compactness_diagnostic,
    elastic_moment_functions,
    predicted_state,
    reach_elastic,
    reach_visco,
    shifted_reach_visco,
    steer,
    synthesize_control,
    target_moments,
    visco_moment_functions,
)
from viscoctl.dynamics import solve_zn_all
from viscoctl.kernels import MemoryKernel, damping_shift, maccamy_data, resolvent
from viscoctl.numgrid import InvalidArgument, make_time_grid
from viscoctl.spectral import (
    ModalState,
    beam_hinged_basis,
    from_x_coordinates,
    norm_X,
    psi_sequence,
    synthetic_basis,
    x_coordinates,
)

KERNEL = MemoryKernel.from_pairs([[0.5, 1.0]])


def visco_system(basis, case, M, grid):
    mc = maccamy_data(resolvent(M, grid))
    zset = solve_zn_all(damping_shift(mc, grid).data, basis.lambdas, grid)
    return visco_moment_functions(basis, case, None, zset, grid), mc


def random_unit_target(basis, case, seed):
    x = np.random.default_rng(seed).standard_normal(2 * basis.N)
    return from_x_coordinates(x / np.linalg.norm(x), basis.lambdas, case)


def test_gram_full_period():
    g = make_time_grid(2 * np.pi, 4000)
    ms = elastic_moment_functions(synthetic_basis([1.0], [1.0]), "B", None, g)
    np.testing.assert_allclose(np.diag(ms.gram), np.pi, rtol=1e-5)
    assert abs(ms.gram[0, 1]) <= 1e-5


def test_gram_off_diagonal_closed_form():
    g = make_time_grid(1.0, 2000)
    lam = np.pi**2
    ms = elastic_moment_functions(synthetic_basis([lam], [1.0]), "B", None, g)
    assert ms.gram[0, 1] == pytest.approx(np.sin(lam) ** 2 / (2 * lam), abs=1e-5)
    assert np.abs(ms.gram - ms.gram.T).max() <= 1e-12


def test_degenerate_mode_flagged():
    g = make_time_grid(1.0, 500)
    ms = elastic_moment_functions(synthetic_basis([1.0, 4.0, 9.0], [1.0, 0.0, 1.0]), "B", None, g)
    assert ms.degenerate.tolist() == [False, True, False]
    assert not ms.gram[[1, 4]].any() and not ms.gram[:, [1, 4]].any()
    with pytest.raises(GramDegenerate) as exc:
        synthesize_control(ms, np.ones(6))
    assert exc.value.min_eig <= 1e-12


def test_memoryless_visco_equals_elastic():
    g = make_time_grid(1.0, 1000)
    basis = beam_hinged_basis(6)
    ms_v, _ = visco_system(basis, "B", MemoryKernel(), g)
    ms_e = elastic_moment_functions(basis, "B", None, g)
    assert np.abs(ms_v.gram - ms_e.gram).max() <= 1e-9


def test_gram_perturbation_size_and_continuity():
    g = make_time_grid(1.0, 1000)
    basis = beam_hinged_basis(8)
    ms_e = elastic_moment_functions(basis, "B", None, g)
    norms = []
    for gamma in (0.5, 0.05, 0.005):
        M = MemoryKernel.from_pairs([[gamma, 1.0]])
        ms_v, _ = visco_system(basis, "B", M, g)
        diff = np.abs(ms_v.gram - ms_e.gram).max()
        assert diff <= 1.0 * np.abs(resolvent(M, g).R).max()
        norms.append(diff)
    ratios = [norms[1] / norms[0], norms[2] / norms[1]]
    assert all(0.05 <= r <= 0.2 for r in ratios), ratios


@pytest.mark.parametrize("N", [4, 8, 16])
@pytest.mark.parametrize("T", [0.5, 1.0, 2.0])
def test_riesz_proxy(N, T):
    g = make_time_grid(T, int(4000 * T))
    eig = np.linalg.eigvalsh(elastic_moment_functions(beam_hinged_basis(N), "B", None, g).gram)
    assert eig[0] > 1e-8 * eig[-1]


def test_target_moments():
    basis = beam_hinged_basis(4)
    assert not target_moments(basis, "B", ModalState.zeros("B", 4)).any()
    m = target_moments(basis, "B", ModalState("B", [1.0, 0, 0, 0], np.zeros(4)))
    assert np.count_nonzero(m) == 1 and m[0] == -1.0
    s = ModalState("A", [1.0, 2, 3, 4], [0.5, 0, 1, 0])
    np.testing.assert_allclose(
        target_moments(basis, "A", s.scaled(2.5)), 2.5 * target_moments(basis, "A", s)
    )
    with pytest.raises(InvalidArgument):
        target_moments(basis, "B", ModalState.zeros("B", 3))


def test_synthesis_small_cases():
    g = make_time_grid(2 * np.pi, 2000)
    ms = elastic_moment_functions(synthetic_basis([1.0], [1.0]), "B", None, g)
    zero = synthesize_control(ms, np.zeros(2))
    assert not zero.values.any()
    m = np.array([0.3, -0.7])
    ctrl = synthesize_control(ms, m)
    # nearly orthogonal Gram: coefficients are close to m_k / G_kk
    np.testing.assert_allclose(ctrl.coefficients, m / np.diag(ms.gram), rtol=1e-4)
    ms1 = elastic_moment_functions(synthetic_basis([1.0], [1.0]), "B", None, g)
    G11 = ms1.gram[0, 0]
    single = synthesize_control(
        type(ms1)(ms1.case, ms1.lambdas, ms1.functions[:1], ms1.gram[:1, :1], "elastic", g, ms1.bg, ms1.degenerate),
        np.array([0.4]),
    )
    np.testing.assert_allclose(single.values, 0.4 / G11 * ms1.functions[0])
    assert single.norm == pytest.approx(0.4 / np.sqrt(G11), rel=1e-12)


def test_reach_zero_control():
    g = make_time_grid(1.0, 200)
    basis = beam_hinged_basis(3)
    zero = np.zeros((g.size, 1))
    assert not x_coordinates(reach_elastic(basis, "B", zero, g), basis.lambdas).any()
    assert not x_coordinates(reach_visco(basis, KERNEL, "B", zero, g), basis.lambdas).any()


@pytest.mark.parametrize("case", ["A", "B"])
def test_elastic_round_trip(case):
    g = make_time_grid(1.0, 1000)
    basis = beam_hinged_basis(8)
    res = steer(basis, case, random_unit_target(basis, case, 3), g)
    assert res.report.residual_rel <= 1e-3


@pytest.mark.parametrize("case", ["A", "B"])
def test_visco_round_trip(case):
    basis = beam_hinged_basis(8)
    target = random_unit_target(basis, case, 4)
    r = [steer(basis, case, target, make_time_grid(1.0, n), KERNEL).report.residual_rel for n in (1000, 2000)]
    assert r[0] <= 1e-2 and r[1] < r[0]


def test_zero_target_gives_zero_control():
    g = make_time_grid(1.0, 1000)
    res = steer(beam_hinged_basis(4), "B", ModalState.zeros("B", 4), g, KERNEL)
    assert not res.control.values.any()
    assert res.report.residual_abs == 0.0


def test_forced_visco_route_without_memory():
    g = make_time_grid(1.0, 1000)
    basis = beam_hinged_basis(4)
    target = random_unit_target(basis, "B", 5)
    a = steer(basis, "B", target, g, MemoryKernel(), visco=True)
    b = steer(basis, "B", target, g, MemoryKernel())
    assert a.moments.kind == "visco" and b.moments.kind == "elastic"
    np.testing.assert_allclose(a.control.values, b.control.values, atol=1e-8)
    with pytest.raises(InvalidArgument):
        steer(basis, "B", target, g, KERNEL, visco=False)


@pytest.mark.parametrize("case", ["A", "B"])
def test_moment_prediction_matches_simulator(case):
    g = make_time_grid(1.0, 1000)
    basis = beam_hinged_basis(6)
    rng = np.random.default_rng(7)
    ms_e = elastic_moment_functions(basis, case, None, g)
    ms_v, mc = visco_system(basis, case, KERNEL, g)
    for _ in range(10):
        h = np.cumsum(rng.standard_normal(g.size))[:, None] * 0.05
        for ms, sim in (
            (ms_e, reach_elastic(basis, case, h, g)),
            (ms_v, shifted_reach_visco(basis, KERNEL, case, h, g, basis.bg, mc.a)),
        ):
            pred = predicted_state(ms, h)
            assert norm_X(pred - sim, basis, case) <= 1e-3 * norm_X(sim, basis, case)


def test_compactness():
    g = make_time_grid(1.0, 2000)
    basis = beam_hinged_basis(12)
    assert compactness_diagnostic(basis, MemoryKernel(), "B", g).max() <= 1e-10
    sv = compactness_diagnostic(basis, KERNEL, "B", g)
    assert np.all(np.diff(sv) <= 1e-15)
    assert sv[23] / sv[0] <= 0.1
    small = compactness_diagnostic(basis, KERNEL.scaled(0.1), "B", g)
    assert 0.5 <= small[0] / (0.1 * sv[0]) <= 2.0


def test_compactness_random_probes_deterministic():
    g = make_time_grid(1.0, 500)
    basis = beam_hinged_basis(4)
    a = compactness_diagnostic(basis, KERNEL, "B", g, probe_count=6, seed=11)
    b = compactness_diagnostic(basis, KERNEL, "B", g, probe_count=6, seed=11)
    np.testing.assert_array_equal(a, b)


def test_annihilator_elastic_and_visco():
    basis = beam_hinged_basis(8)
    g = make_time_grid(1.0, 4000)
    res = annihilator_diagnostic(elastic_moment_functions(basis, "B", None, g))
    assert res.min_eig > 0 and res.witness is None
    g = make_time_grid(0.5, 2000)
    ms, _ = visco_system(basis, "B", KERNEL, g)
    res = annihilator_diagnostic(ms)
    assert res.min_eig > 0 and res.witness is None


@pytest.mark.parametrize("visco", [False, True])
def test_annihilator_witness_is_invisible_mode(visco):
    basis = synthetic_basis((np.arange(1, 6) * np.pi) ** 2, [1, 1, 0, 1, 1])
    g = make_time_grid(1.0, 4000)
    ms = visco_system(basis, "B", KERNEL, g)[0] if visco else elastic_moment_functions(basis, "B", None, g)
    w = annihilator_diagnostic(ms).witness
    assert w is not None
    coeffs = np.abs(np.concatenate([w.w, w.wp]))
    mode3 = coeffs[[2, 7]]
    others = np.delete(coeffs, [2, 7])
    assert mode3.max() > 0 and others.max() <= 1e-10 * mode3.max()
    assert psi_sequence(basis, "B").degenerate[2]
