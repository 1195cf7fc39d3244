import json
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heatflux.generator import jump_rates
from heatflux.model import (ModelError, ModelSpec, gibbs_populations, load_model, make_model,
                            random_coupling, validate_model)


def config(**overrides):
    cfg = {"dimension": 2, "energies": [0, 1], "beta_S": 2, "beta_B": 1,
           "coupling": {"type": "explicit", "matrix": [[0, 1], [1, 0]]}}
    cfg.update(overrides)
    return json.dumps(cfg)


def test_load_smallest_model():
    spec = load_model(config())
    assert spec.dimension == 2
    np.testing.assert_array_equal(spec.bare_energies, [0.0, 1.0])
    assert spec.beta_S == 2.0 and spec.beta_B == 1.0
    assert spec.coupling[0, 1] == 1.0


def test_degenerate_spectrum_rejected():
    with pytest.raises(ModelError, match="degenerate spectrum") as err:
        load_model(config(dimension=3, energies=[0, 1, 1],
                          coupling={"type": "uniform", "value": 1}))
    assert err.value.field == "energies"


def test_energy_shift_stored_and_rates_unchanged():
    shifted = load_model(config(energies=[5, 6]))
    plain = load_model(config())
    np.testing.assert_array_equal(shifted.bare_energies, [0.0, 1.0])
    # brute-force evaluation of C * exp(-beta_B (E_m - E_n)/2) on the unshifted input
    E = [5.0, 6.0]
    brute = np.array([[0.0 if m == n else np.exp(-1.0 * (E[m] - E[n]) / 2) for n in range(2)]
                      for m in range(2)])
    np.testing.assert_allclose(jump_rates(shifted).rates, brute, rtol=1e-15)
    np.testing.assert_array_equal(jump_rates(shifted).rates, jump_rates(plain).rates)


@pytest.mark.parametrize("overrides, field", [
    ({"beta_S": 0}, "beta_S"),
    ({"beta_B": -1}, "beta_B"),
    ({"coupling": {"type": "explicit", "matrix": [[0, 1], [0.9, 0]]}}, "coupling"),
    ({"coupling": {"type": "explicit", "matrix": [[0, -1], [-1, 0]]}}, "coupling"),
    ({"coupling": {"type": "explicit", "matrix": [[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1],
                                                  [0, 0, 1, 0]]},
      "energies": [0, 1, 2, 3], "dimension": 4}, "coupling"),
    ({"energies": [1, 0]}, "energies"),
    ({"dimension": 3}, "dimension"),
    ({"energies": [0, 400]}, "energies"),
    ({"coupling": {"type": "weird"}}, "coupling.type"),
    ({"coupling": {"type": "random", "seed": -1, "low": 0.1, "high": 1}}, "coupling.seed"),
    ({"coupling": {"type": "random", "seed": 1, "low": 0, "high": 1}}, "coupling.low"),
])
def test_invalid_configs_name_field(overrides, field):
    with pytest.raises(ModelError) as err:
        load_model(config(**overrides))
    assert err.value.field == field


def test_parse_failure():
    with pytest.raises(ModelError, match="parse failure"):
        load_model("{not json")


def test_missing_field():
    with pytest.raises(ModelError) as err:
        load_model(json.dumps({"energies": [0, 1], "beta_S": 1, "beta_B": 1}))
    assert err.value.field == "coupling"


def test_diagonal_coupling_ignored_with_warning():
    with pytest.warns(UserWarning, match="diagonal"):
        spec = load_model(config(coupling={"type": "explicit", "matrix": [[3, 1], [1, 7]]}))
    assert np.all(np.diag(spec.coupling) == 0)


def test_random_and_uniform_coupling():
    spec = load_model(config(dimension=4, energies=[0, 1, 2.5, 3],
                             coupling={"type": "random", "seed": 2**64 - 1, "low": 0.2, "high": 0.9}))
    C = spec.coupling
    assert np.array_equal(C, C.T)
    off = C[~np.eye(4, dtype=bool)]
    assert off.min() >= 0.2 and off.max() <= 0.9
    np.testing.assert_array_equal(C, random_coupling(4, 2**64 - 1, 0.2, 0.9))

    spec = load_model(config(coupling={"type": "uniform", "value": 0.5}))
    np.testing.assert_array_equal(spec.coupling, [[0, 0.5], [0.5, 0]])


def test_effective_energies_default_and_explicit():
    spec = load_model(config())
    assert spec.effective_energies is None
    np.testing.assert_array_equal(spec.energies_eff, spec.bare_energies)
    spec = load_model(config(effective_energies=[1.0, 3.5]))
    np.testing.assert_array_equal(spec.energies_eff, [0.0, 2.5])


def test_gibbs_two_level():
    np.testing.assert_allclose(gibbs_populations([0, 1], 2.0), [0.8807970779778824, 0.11920292202211756],
                               rtol=1e-15)


def test_gibbs_infinite_temperature():
    np.testing.assert_allclose(gibbs_populations([0, 1], 1e-12), [0.5, 0.5], atol=1e-9)


def test_gibbs_three_level_against_high_precision():
    mpmath.mp.dps = 40
    w = [mpmath.exp(-k) for k in range(3)]
    expected = [float(x / mpmath.fsum(w)) for x in w]
    np.testing.assert_allclose(gibbs_populations([0, 1, 2], 1.0), expected, rtol=1e-15)


def test_gibbs_no_overflow():
    p = gibbs_populations([1000.0, 1001.0], 250.0)
    assert np.all(np.isfinite(p)) and abs(p.sum() - 1) < 1e-15


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.05, 2.0), min_size=1, max_size=6),
       st.floats(0.05, 5.0), st.floats(-50, 50))
def test_gibbs_shift_invariant_and_decreasing(gaps, beta, shift):
    E = np.concatenate([[0.0], np.cumsum(gaps)])
    p = gibbs_populations(E, beta)
    np.testing.assert_allclose(gibbs_populations(E + shift, beta), p, rtol=1e-12)
    assert np.all(np.diff(p) < 0)
    assert abs(p.sum() - 1) < 1e-12


def test_validate_valid_two_level(two_level):
    report = validate_model(two_level)
    assert report.passed


def test_validate_reports_asymmetry_residual():
    spec = ModelSpec(np.array([0.0, 1.0]), 2.0, 1.0, np.array([[0.0, 1.0], [0.9, 0.0]]))
    report = validate_model(spec)
    assert not report.passed
    item = next(i for i in report.items if i.label == "coupling asymmetry")
    assert not item.passed
    assert item.residual == pytest.approx(0.1, abs=1e-15)


def test_validate_reports_disconnected_graph():
    C = np.zeros((4, 4))
    C[0, 1] = C[1, 0] = C[2, 3] = C[3, 2] = 1.0
    report = validate_model(ModelSpec(np.arange(4.0), 1.0, 1.0, C))
    failed = [i.label for i in report.failures]
    assert failed == ["coupling graph disconnected"]


def test_make_model_shift_is_exact():
    spec = make_model([5.0, 6.0, 7.5], 1.0, 1.0, np.ones((3, 3)) - np.eye(3))
    np.testing.assert_array_equal(spec.bare_energies, [0.0, 1.0, 2.5])


def test_spec_values_are_immutable(two_level):
    with pytest.raises(Exception):
        two_level.beta_B = 3.0


def test_no_warning_for_clean_coupling():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        make_model([0, 1], 1, 1, [[0, 1], [1, 0]])
