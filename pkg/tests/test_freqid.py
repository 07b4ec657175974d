import dataclasses
import math

import numpy as np
import pytest
from scipy import integrate, linalg

from qip.errors import InvalidModel, Unscalable
from qip.freqid import (
    DEFAULT_POLES,
    FrequencySample,
    PlantConfig,
    Scenario,
    bode_envelope,
    envelope_containment,
    eval_basis,
    fit_qip,
    fit_wls,
    ls_min_scaling,
    lyapunov_solve,
    make_basis,
    run_scenario,
    simulate,
    simulate_plant,
    true_response,
)
from qip.inclusion import Inclusion
from qip.noise import NoiseSummary
from qip.solver import Status


def h2_gram(g, lo=1e-4, hi=1e4, n=20_001):
    """H2 Gram matrix of the basis outputs by log-grid quadrature.

    Uses conjugate symmetry to integrate over positive frequencies only and
    adds the analytic tails: the integrand is flat below ``lo`` and decays
    like ``1/omega^2`` above ``hi``.
    """
    u = np.linspace(math.log(lo), math.log(hi), n)
    w = np.exp(u)
    X = np.array([eval_basis(g, wk) for wk in w])
    F = np.einsum("ki,kj->kij", X, X.conj()).real
    body = integrate.simpson(F * w[:, None, None], x=u, axis=0)
    tails = F[0] * lo + F[-1] * hi
    return (body + tails) / math.pi


# -- Lyapunov ------------------------------------------------------------------------

def test_lyapunov_scalar():
    assert lyapunov_solve(-1.0, 2.0)[0, 0] == pytest.approx(1.0)


def test_lyapunov_diagonal():
    np.testing.assert_allclose(lyapunov_solve(np.diag([-1.0, -2.0]), np.eye(2)),
                               np.diag([0.5, 0.25]), atol=1e-14)


def test_lyapunov_random_against_scipy(rng):
    A = rng.standard_normal((6, 6))
    A -= (np.max(np.linalg.eigvals(A).real) + 1.0) * np.eye(6)
    G = rng.standard_normal((6, 6))
    M = G @ G.T
    W = lyapunov_solve(A, M)
    assert np.linalg.norm(W @ A + A.T @ W + M) <= 1e-9 * np.linalg.norm(M)
    np.testing.assert_allclose(W, linalg.solve_continuous_lyapunov(A.T, -M), rtol=1e-9, atol=1e-12)
    assert np.linalg.eigvalsh(W)[0] > 0


def test_lyapunov_rejects_unstable():
    with pytest.raises(ValueError):
        lyapunov_solve(np.diag([-1.0, 0.5]), np.eye(2))


# -- basis -----------------------------------------------------------------------------

def test_first_order_basis():
    g = make_basis([-1.0])
    assert eval_basis(g, 1.0)[0] == pytest.approx(math.sqrt(2) / (1 + 1j), rel=1e-12)
    assert h2_gram(g)[0, 0] == pytest.approx(1.0, abs=1e-6)


def test_two_pole_basis_orthonormal():
    np.testing.assert_allclose(h2_gram(make_basis([-1.0, -2.0])), np.eye(2), atol=1e-6)


def test_default_basis_gramian_identity():
    g = make_basis(DEFAULT_POLES)
    np.testing.assert_allclose(g.C_g @ g.W_c @ g.C_g.T, np.eye(6), atol=1e-8)
    assert np.max(np.linalg.eigvals(g.A_g).real) < 0
    np.testing.assert_allclose(np.sort_complex(np.linalg.eigvals(g.A_g)),
                               np.sort_complex(np.array(DEFAULT_POLES)), rtol=1e-8)


def test_default_basis_orthonormal_by_quadrature():
    np.testing.assert_allclose(h2_gram(make_basis(DEFAULT_POLES)), np.eye(6), atol=1e-6)


def test_eval_basis_zero_input():
    assert not np.any(eval_basis(make_basis(DEFAULT_POLES), 2.0, F=0.0))


def test_eval_basis_conjugate_symmetry():
    g = make_basis(DEFAULT_POLES)
    np.testing.assert_allclose(eval_basis(g, -3.0), np.conj(eval_basis(g, 3.0)), rtol=1e-12)


def test_make_basis_requires_conjugate_pairs():
    with pytest.raises(ValueError):
        make_basis([complex(-1, 1), -2.0])
    with pytest.raises(ValueError):
        make_basis([0.5])


# -- plant -----------------------------------------------------------------------------

QUIET = PlantConfig(noise_in=0.0, noise_out=0.0, delay=0.0, dampings=((0.5, 0.5),))


def test_dc_limit():
    g = make_basis(DEFAULT_POLES)
    s = simulate_plant(dataclasses.replace(QUIET, gain=2.5), 0, 1e-4, 1, g)
    assert abs(s.y) == pytest.approx(2.5, rel=1e-6)


def test_delay_phase_exact():
    w = np.logspace(-2, 2, 25)
    g0 = true_response(QUIET, 0, w)
    g1 = true_response(dataclasses.replace(QUIET, delay=0.1), 0, w)
    np.testing.assert_allclose(g1 / g0, np.exp(-0.1j * w), rtol=1e-12)
    basis = make_basis(DEFAULT_POLES)
    cfg = dataclasses.replace(QUIET, delay=0.1)
    s = simulate_plant(cfg, 0, 3.0, 1, basis)
    assert s.y == pytest.approx(complex(true_response(cfg, 0, 3.0)), rel=1e-14)


def test_noise_averaging_law():
    cfg = PlantConfig(noise_in=0.0, noise_out=0.05, dampings=((0.1, 0.1),))
    basis = make_basis(DEFAULT_POLES)
    levels = []
    for n in (4, 16, 64):
        tr = [np.trace(simulate_plant(cfg, 0, 1.0, n, basis, index=k).y_summary.sigma_eta)
              for k in range(300)]
        levels.append(np.mean(tr))
    # expected 2 sigma^2 / (T n) with T = 2 pi
    for n, lev in zip((4, 16, 64), levels):
        assert lev == pytest.approx(2 * 0.05**2 / (2 * math.pi) / n, rel=0.15)


def test_simulation_reproducible():
    sc = Scenario(grid=(0.1, 10.0, 5))
    a, b = simulate(sc), simulate(sc)
    assert all(x.y == y.y for x, y in zip(a, b))
    c = simulate(dataclasses.replace(sc, plant=dataclasses.replace(sc.plant, seed=9)))
    assert any(x.y != y.y for x, y in zip(a, c))


def test_plant_config_validation():
    with pytest.raises(ValueError):
        PlantConfig(dampings=((0.1, 1.2),))
    with pytest.raises(ValueError):
        PlantConfig(delay=-1.0)
    with pytest.raises(ValueError):
        simulate_plant(PlantConfig(), 5, 1.0, 2, make_basis(DEFAULT_POLES))


# -- fitting ------------------------------------------------------------------------------

def _linear_samples(a, omegas, basis):
    return [FrequencySample(w, eval_basis(basis, w), NoiseSummary.exact([a @ eval_basis(basis, w)]))
            for w in omegas]


A_TRUE = np.array([0.3, -0.2, 0.5, 0.1, 0.05, -0.4])


def test_fit_qip_exact_linear_is_unbounded():
    basis = make_basis(DEFAULT_POLES)
    model, rep = fit_qip(_linear_samples(A_TRUE, np.logspace(-2, 2, 60), basis))
    assert rep.status == Status.UNBOUNDED.value
    assert model is None
    assert math.isinf(rep.width)


def test_fit_qip_two_conditions_feasible():
    cfg = dataclasses.replace(PlantConfig(), dampings=((0.1, 0.1), (0.3, 0.2)))
    sc = Scenario(plant=cfg, grid=(0.01, 100.0, 40))
    samples = simulate(sc)
    model, rep = fit_qip(samples)
    assert rep.status == Status.OPTIMAL.value
    assert min(rep.slacks) >= -1e-9
    assert 0 < rep.width < math.inf
    assert rep.result.kkt.min_slack >= -1e-9


def test_fit_qip_needs_two_samples():
    basis = make_basis(DEFAULT_POLES)
    with pytest.raises(InvalidModel):
        fit_qip(_linear_samples(A_TRUE, [1.0], basis))


def test_wls_exact_interpolation():
    basis = make_basis(DEFAULT_POLES)
    A_LS, Sigma_A = fit_wls(_linear_samples(A_TRUE, np.logspace(-2, 2, 30), basis))
    np.testing.assert_allclose(A_LS, A_TRUE, atol=1e-8)
    assert np.linalg.norm(Sigma_A) < 1e-20


def test_wls_duplication_halves_covariance():
    samples = simulate(Scenario(grid=(0.01, 100.0, 20)))
    A1, S1 = fit_wls(samples)
    A2, S2 = fit_wls(samples + samples)
    np.testing.assert_allclose(A2, A1, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(S2, S1 / 2, rtol=1e-9)


def test_wls_needs_enough_samples():
    basis = make_basis(DEFAULT_POLES)
    with pytest.raises(InvalidModel):
        fit_wls(_linear_samples(A_TRUE, [1.0, 2.0], basis))


def test_ls_scaling_zero_on_model():
    basis = make_basis(DEFAULT_POLES)
    samples = _linear_samples(A_TRUE, np.logspace(-1, 1, 8), basis)
    assert ls_min_scaling(samples, A_TRUE, np.eye(6), alpha=1.0) == 0.0


def test_ls_scaling_single_sample():
    x = np.array([1.0, 0, 0, 0, 0, 0], dtype=complex)
    Sigma_A = 0.5 * np.eye(6)
    # residual^2 = 2 x* Sigma_A x = 1
    s = FrequencySample(1.0, x, NoiseSummary.exact([1.0]))
    assert ls_min_scaling([s], np.zeros(6), Sigma_A, alpha=3.0) == pytest.approx(2.0)


def test_ls_scaling_unscalable():
    x = np.array([1.0, 0, 0, 0, 0, 0], dtype=complex)
    s = FrequencySample(1.0, x, NoiseSummary.exact([1.0]))
    with pytest.raises(Unscalable):
        ls_min_scaling([s], np.zeros(6), np.zeros((6, 6)), alpha=1.0)


# -- envelopes -------------------------------------------------------------------------------

def test_envelope_collapses_without_uncertainty():
    basis = make_basis(DEFAULT_POLES)
    m = Inclusion(A_TRUE[None, :], [[1.0]], np.zeros((6, 6)), strict=False)
    env = bode_envelope(m, basis, [0.1, 1.0, 10.0])
    np.testing.assert_array_equal(env.lower, env.nominal)
    np.testing.assert_array_equal(env.upper, env.nominal)


def test_envelope_unit_model():
    basis = make_basis(DEFAULT_POLES)
    grid = [0.1, 1.0, 10.0]
    env = bode_envelope(Inclusion(np.zeros((1, 6)), [[1.0]], np.eye(6)), basis, grid)
    np.testing.assert_array_equal(env.lower, 0.0)
    np.testing.assert_allclose(env.upper, [np.linalg.norm(eval_basis(basis, w)) for w in grid])


def test_envelope_requires_scalar_output():
    with pytest.raises(InvalidModel):
        bode_envelope(Inclusion(np.zeros((2, 6)), np.eye(2), np.eye(6)),
                      make_basis(DEFAULT_POLES), [1.0])


# -- scenario -------------------------------------------------------------------------------

def test_scenario_round_trip(tmp_path):
    sc = Scenario(repeats=8, delta=0.05)
    again = Scenario.from_dict(sc.to_dict())
    assert again == sc
    path = tmp_path / "sc.json"
    import json
    path.write_text(json.dumps({"repeats": 4, "noise": {"output": 0.0}, "seed": 3}))
    loaded = Scenario.load(path)
    assert loaded.repeats == 4 and loaded.plant.noise_out == 0.0 and loaded.plant.seed == 3


def test_noiseless_single_condition_matched_basis_is_unbounded():
    plant = PlantConfig(noise_in=0.0, noise_out=0.0, delay=0.0, dampings=((0.1, 0.1),))
    poles = []
    for w, z in zip(plant.modes, plant.dampings[0]):
        r = complex(-z * w, w * math.sqrt(1 - z * z))
        poles += [r, r.conjugate()]
    poles += [-10.0, -50.0]
    res = run_scenario(Scenario(plant=plant, repeats=1, basis_poles=tuple(poles)))
    assert res.qip_report.status == Status.UNBOUNDED.value


def test_two_seeds_keep_ordering():
    gammas = []
    for seed in (1, 2):
        sc = Scenario(plant=dataclasses.replace(PlantConfig(), seed=seed))
        res = run_scenario(sc)
        assert res.qip_report.status == Status.OPTIMAL.value
        assert res.qip_width < res.ls_width
        gammas.append(res.gamma_min)
        assert min(envelope_containment(res.qip_envelope, sc)) >= 0.95
    assert gammas[0] != gammas[1]
