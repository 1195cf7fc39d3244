import math

import numpy as np
import pytest

from heatflux.ensemble import random_model
from heatflux.generator import decay_rates, generator_for
from heatflux.model import ModelError, gibbs_populations
from heatflux.propagator import (PropagatorError, StochasticMatrix, _clean_stochastic, evolve_density,
                                 evolve_populations, path_agreement, power_symmetry_check, propagator,
                                 propagator_grid, scaled_tau_grid, stochastic_report, taylor_propagator)

from conftest import TWO_LEVEL, random_density


def test_tau_zero_is_identity(two_level):
    P = propagator(generator_for(two_level), two_level, 0.0)
    np.testing.assert_array_equal(P.entries, np.eye(2))


def test_two_level_propagator_closed_form(two_level):
    P = propagator(generator_for(two_level), two_level, 1.0).entries
    np.testing.assert_allclose(P, TWO_LEVEL["P"], rtol=0, atol=1e-15)


def test_long_time_limit_is_bath_gibbs():
    for seed in range(5):
        spec = random_model(5, seed)
        gen = generator_for(spec)
        P = propagator(gen, spec, 1e6 / gen.norm).entries
        g = gibbs_populations(spec.bare_energies, spec.beta_B)
        assert np.max(np.abs(P - g[:, None])) < 1e-8


def test_negative_tau_rejected(two_level):
    with pytest.raises(ValueError):
        propagator(generator_for(two_level), two_level, -1.0)


def test_clean_stochastic_clamps_and_rejects():
    P = np.array([[1.0 + 5e-13, 0.5], [-5e-13, 0.5]])
    out = _clean_stochastic(P)
    assert out.min() == 0.0
    np.testing.assert_allclose(out.sum(axis=0), 1.0, atol=1e-15)
    with pytest.raises(PropagatorError, match="not stochastic"):
        _clean_stochastic(np.array([[1.01, 0.5], [-0.01, 0.5]]))
    with pytest.raises(PropagatorError, match="not stochastic"):
        _clean_stochastic(np.array([[0.9, 0.5], [0.0, 0.5]]))


def test_evolve_stationary_state_is_fixed():
    spec = random_model(6, 11)
    gen = generator_for(spec)
    g = gibbs_populations(spec.bare_energies, spec.beta_B)
    for tau in (0.01, 0.3, 2.0, 40.0):
        v = evolve_populations(propagator(gen, spec, tau), g)
        assert np.max(np.abs(v - g)) < 1e-10


def test_evolve_two_level_from_ground(two_level):
    v = evolve_populations(propagator(generator_for(two_level), two_level, 1.0), [1.0, 0.0])
    np.testing.assert_allclose(v, [TWO_LEVEL["P"][0][0], TWO_LEVEL["P"][1][0]], atol=1e-15)


def test_evolve_tau_zero_exact(two_level):
    v0 = np.array([0.3, 0.7])
    v = evolve_populations(propagator(generator_for(two_level), two_level, 0.0), v0)
    np.testing.assert_array_equal(v, v0)


def test_evolve_dimension_mismatch(two_level):
    P = propagator(generator_for(two_level), two_level, 1.0)
    with pytest.raises(ValueError, match="dimension"):
        evolve_populations(P, [0.2, 0.3, 0.5])


def test_diagonal_density_stays_diagonal():
    spec = random_model(4, 5)
    gen = generator_for(spec)
    rho0 = np.diag([0.1, 0.2, 0.3, 0.4]).astype(complex)
    for tau in (0.1, 1.0, 10.0):
        rho = evolve_density(rho0, spec, gen, tau)
        assert np.all(rho[~np.eye(4, dtype=bool)] == 0)
        assert abs(np.trace(rho) - 1) < 1e-12


def test_two_level_coherence_modulus(two_level):
    gen = generator_for(two_level)
    rho0 = np.array([[0.5, 0.3], [0.3, 0.5]], dtype=complex)
    rho = evolve_density(rho0, two_level, gen, 1.0)
    assert abs(rho[0, 1]) == pytest.approx(TWO_LEVEL["coherence_modulus"], rel=1e-14)
    # phase advances by -omega_12 tau = +1
    assert np.angle(rho[0, 1]) == pytest.approx(1.0, abs=1e-14)


def test_density_tau_zero_exact(two_level):
    rho0 = np.array([[0.6, 0.2 - 0.1j], [0.2 + 0.1j, 0.4]])
    rho = evolve_density(rho0, two_level, generator_for(two_level), 0.0)
    np.testing.assert_array_equal(rho, rho0)


def test_density_result_valid():
    rng = np.random.default_rng(1)
    spec = random_model(5, 2)
    gen = generator_for(spec)
    rho = evolve_density(random_density(5, rng), spec, gen, 0.7)
    assert np.max(np.abs(rho - rho.conj().T)) < 1e-14
    assert abs(np.trace(rho) - 1) < 1e-12
    assert np.linalg.eigvalsh(rho).min() > -1e-10


def test_invalid_density_rejected(two_level):
    with pytest.raises(ModelError):
        evolve_density(np.array([[0.5, 0.3], [0.1, 0.5]]), two_level, generator_for(two_level), 1.0)


def test_power_symmetry_first_power_is_minus_coupling():
    spec = random_model(5, 9)
    gen = generator_for(spec)
    E = spec.bare_energies
    M = gen.a_matrix * np.exp(spec.beta_B * (E[:, None] - E[None, :]) / 2)
    off = ~np.eye(5, dtype=bool)
    np.testing.assert_allclose(M[off], -spec.coupling[off], rtol=1e-14)
    assert power_symmetry_check(gen, spec, s_max=1).passed


def test_power_symmetry_two_level(two_level):
    report = power_symmetry_check(generator_for(two_level), two_level, s_max=10)
    assert report.passed
    assert report.max_residual() < 1e-12


def test_taylor_detailed_balance_random_six_level():
    spec = random_model(6, 42)
    gen = generator_for(spec)
    report = power_symmetry_check(gen, spec, s_max=10, tau=0.7)
    assert report.passed, report.summary()
    T = taylor_propagator(gen.a_matrix, 0.7)
    E = spec.bare_energies
    for n in range(6):
        for m in range(6):
            if m != n:
                assert T[n, m] / T[m, n] == pytest.approx(math.exp(-spec.beta_B * (E[n] - E[m])), rel=1e-9)


def test_taylor_matches_closed_form(two_level):
    T = taylor_propagator(generator_for(two_level).a_matrix, 1.0)
    np.testing.assert_allclose(T, TWO_LEVEL["P"], atol=1e-15)


def test_taylor_independent_of_eigen_path_against_scipy():
    from scipy.linalg import expm

    spec = random_model(7, 4)
    A = generator_for(spec).a_matrix
    for tau in (0.05, 1.0, 6.0):
        np.testing.assert_allclose(taylor_propagator(A, tau), expm(-tau * A), rtol=1e-11, atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_semigroup_and_stochasticity(seed):
    spec = random_model(2 + 2 * seed, seed)
    gen = generator_for(spec)
    P1, P2 = propagator(gen, spec, 0.4), propagator(gen, spec, 1.1)
    P12 = propagator(gen, spec, 1.5)
    assert np.max(np.abs(P1.entries @ P2.entries - P12.entries)) < 1e-9
    assert stochastic_report(P12, spec, gen).passed


def test_convergence_to_stationarity_monotone():
    spec = random_model(6, 8)
    gen = generator_for(spec)
    g = gibbs_populations(spec.bare_energies, spec.beta_B)
    devs = [np.max(np.abs(propagator(gen, spec, t).entries - g[:, None]))
            for t in scaled_tau_grid(gen, [0.1, 0.5, 1, 2, 5, 10, 20])]
    assert all(b < a for a, b in zip(devs, devs[1:]))


def test_paths_agree():
    spec = random_model(9, 13)
    gen = generator_for(spec)
    for tau in scaled_tau_grid(gen):
        assert path_agreement(propagator(gen, spec, tau), gen).passed


def test_grid_order_independent_of_workers():
    spec = random_model(5, 1)
    gen = generator_for(spec)
    taus = [0.1, 0.5, 1.0, 2.0]
    serial = propagator_grid(gen, spec, taus, workers=1)
    threaded = propagator_grid(gen, spec, taus, workers=4)
    for a, b in zip(serial, threaded):
        assert a.tau == b.tau
        np.testing.assert_array_equal(a.entries, b.entries)


def test_coherence_decay_law_on_random_states():
    rng = np.random.default_rng(7)
    spec = random_model(6, 21)
    gen = generator_for(spec)
    table = decay_rates(gen.rate_matrix, spec)
    rho0 = random_density(6, rng)
    tau = 0.8
    rho = evolve_density(rho0, spec, gen, tau)
    off = ~np.eye(6, dtype=bool)
    ratio = np.abs(rho[off]) / np.abs(rho0[off])
    np.testing.assert_allclose(ratio, np.exp(-table.gamma[off] * tau), rtol=1e-12)


def test_stochastic_matrix_is_frozen(two_level):
    P = propagator(generator_for(two_level), two_level, 1.0)
    assert isinstance(P, StochasticMatrix)
    with pytest.raises(Exception):
        P.tau = 2.0


def test_large_dimension_smoke():
    from heatflux.heat import detailed_balance_check, fr_check, heat_support
    from heatflux.generator import spectral_report

    spec = random_model(200, 0, gap_range=(0.01, 0.1))
    gen = generator_for(spec)
    assert spectral_report(gen, spec).passed
    sup = heat_support(spec, tol=1e-13)
    for tau in scaled_tau_grid(gen, [0.5, 5.0]):
        P = propagator(gen, spec, tau)
        assert stochastic_report(P, spec, gen).passed
        assert detailed_balance_check(P, spec).passed
        assert fr_check(spec, P, sup).passed
        assert path_agreement(P, gen).passed
