import math

import numpy as np
import pytest

from graphs import built_in, minimal_section, yosida
from presets import preset_problem
from problem import (
    ProblemSpecError,
    build_regularized,
    constants,
    growth_constant,
    has_errors,
    regularize_initial,
    validate,
)
from spectral import eigenpairs, interval, project


def _codes(violations):
    return {v.code for v in violations}


def test_presets_validate_cleanly():
    for name in ("stefan", "porous_medium", "linear_heat", "lipschitz_demo"):
        violations = validate(preset_problem(name))
        assert not has_errors(violations), violations


def test_hele_shaw_warns_about_strict_convexity():
    violations = validate(preset_problem("hele_shaw"))
    assert not has_errors(violations)
    assert "alpha_not_strictly_convex" in _codes(violations)
    [warning] = [v for v in violations if v.code == "alpha_not_strictly_convex"]
    assert warning.to_dict()["severity"] == "warning"


def test_v0_membership():
    ok = preset_problem("hele_shaw", v0="fill(value=0.5)")
    assert "v0_not_in_alpha" not in _codes(validate(ok))
    bad = preset_problem("hele_shaw", v0="constant(c=2)")
    assert "v0_not_in_alpha" in _codes(validate(bad))


@pytest.mark.parametrize(
    "overrides, code",
    [
        ({"q": 2.0}, "q_range"),
        ({"T": -1.0}, "horizon"),
        ({"g": "sin(amp=2)", "lambda_g": 1.0}, "g_lipschitz"),
        ({"kernel": "power(ell_coef=1, ell_exp=-0.5, kappa_coef=1, kappa_exp=-0.5)"}, "sonine"),
    ],
)
def test_validate_reports_violations(overrides, code):
    violations = validate(preset_problem("linear_heat", **overrides))
    assert code in _codes(violations)
    assert has_errors(violations)


def test_declared_forcing_constant_is_accepted():
    spec = preset_problem("lipschitz_demo", g="sin(amp=0.5)")
    assert spec.lambda_g == 0.5
    assert not has_errors(validate(spec))


@pytest.mark.parametrize("eps", [0.5, 0.1, 0.01])
@pytest.mark.parametrize("name", ["stefan", "hele_shaw"])
def test_initial_data_regularization_bounds(name, eps):
    spec = preset_problem(name, beta="arctan")
    basis = eigenpairs(spec.domain, 8, oversample=4)
    u0, v0 = spec.initial_fields(basis.nodes)
    u0e, v0e = regularize_initial(spec, eps, basis.nodes)

    assert np.all(np.abs(v0e) <= np.abs(v0) + 1e-10)
    assert np.all(np.abs(u0e - u0) <= eps * np.abs(v0) + 1e-10)
    beta_e = np.asarray(yosida(spec.beta, eps, u0e))
    assert np.all(np.abs(beta_e) <= np.abs(np.asarray(minimal_section(spec.beta, u0))) + np.abs(v0) + 1e-10)

    jump = u0 == 0.0
    assert jump.any()
    np.testing.assert_allclose(v0e[jump], v0[jump], atol=1e-12)
    np.testing.assert_allclose(v0e[jump], 0.5, atol=1e-12)


def test_regularize_initial_rejects_eps_out_of_range():
    spec = preset_problem("stefan")
    with pytest.raises(ProblemSpecError):
        regularize_initial(spec, 1.5, eigenpairs(spec.domain, 4).nodes)


def test_build_regularized_records():
    spec = preset_problem("stefan", beta="arctan")
    basis = eigenpairs(spec.domain, 16)
    init = build_regularized(spec, 0.05, 0.01, basis)

    np.testing.assert_allclose(init.v0ne, 0.01 * init.u0e + init.v0e)
    np.testing.assert_allclose(init.z0, project(basis, init.v0ne))
    assert init.initial_potential >= 0.0
    assert 0.0 <= init.pairing_bound <= init.pairing_uniform + 1e-12
    assert 0.0 <= init.beta_q_energy <= init.beta_q_bound + 1e-12
    assert set(init.records()) == {"initial_potential", "pairing_bound", "pairing_uniform",
                                   "beta_q_energy", "beta_q_bound"}


def test_build_regularized_with_section_v0():
    spec = preset_problem("hele_shaw", v0="section")
    init = build_regularized(spec, 0.1, 0.1, eigenpairs(spec.domain, 8))
    assert math.isfinite(init.pairing_bound)
    assert init.pairing_bound >= 0.0


def test_uniqueness_window_for_lipschitz_demo():
    spec = preset_problem("lipschitz_demo")
    c = constants(spec, eigenpairs(spec.domain, 8))
    assert c.c_V == pytest.approx(1.0 / math.pi)
    assert c.tau_window == pytest.approx(math.pi / 8.0, abs=1e-12)
    assert c.windows == 3
    assert c.C_G == 0.0


def test_window_without_lipschitz_beta_or_strong_alpha():
    c = constants(preset_problem("hele_shaw"), eigenpairs(interval(1.0), 4))
    assert c.tau_window is None
    assert c.notes

    c = constants(preset_problem("linear_heat"), eigenpairs(interval(1.0), 4))
    assert math.isinf(c.tau_window)
    assert c.windows == 1
    assert c.to_dict()["notes"]


def test_growth_constant():
    assert growth_constant(0.3, 0.0, 3.0, 1.0) == 0.0
    c_V, lg, q, meas = 1.0 / math.pi, 0.5, 3.0, 2.0
    expected = (c_V ** 2 * lg ** 2 * meas
                + (q - 2) / (2 * q) * lg ** (2 * q / (q - 2))
                * (q / (2 * (2 + q) * c_V ** 2)) ** (-(q + 2) / (q - 2)) * meas)
    assert growth_constant(c_V, lg, q, meas) == pytest.approx(expected)
    assert growth_constant(c_V, 2 * lg, q, meas) > growth_constant(c_V, lg, q, meas)


def test_describe_includes_labels():
    d = preset_problem("porous_medium").describe()
    assert d["alpha"]["name"] == "power"
    assert d["alpha"]["p"] == 1.5
    assert d["preset"] == "porous_medium"
    assert d["pair"]["theta"] == 0.5


def test_minimal_section_used_when_v0_missing():
    spec = preset_problem("stefan", v0="section", u0="sine(amp=1)")
    nodes = eigenpairs(spec.domain, 4).nodes
    u0, v0 = spec.initial_fields(nodes)
    np.testing.assert_allclose(v0, minimal_section(built_in("stefan"), u0))
