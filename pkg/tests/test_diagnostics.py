import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.special import gamma

from artifacts_manager import canonical_json
from diagnostics import (
    chain_rule_check,
    chain_rule_slack,
    chain_tolerance,
    diagnostics_summary,
    energy_report,
    eta_potential,
    increment_modulus,
    lq_bound,
)
from graphs import built_in
from kernels import positive_type_form
from presets import preset_problem
from solver import SolverParams, solve


@pytest.fixture(scope="module")
def stefan_run():
    spec = preset_problem("stefan", beta="arctan")
    return solve(spec, SolverParams(eps=1e-2, nu=1e-2, n=8, M=32))


@pytest.fixture(scope="module")
def linear_run():
    spec = preset_problem("linear_heat", u0="mode(i=1)")
    return solve(spec, SolverParams(eps=1e-6, nu=1e-6, n=2, M=64, tol=1e-12))


def test_energy_report_holds_on_stefan(stefan_run):
    report = energy_report(stefan_run)
    assert report.ok, report.violations
    assert np.all(report.psi >= -1e-8)
    assert np.all(report.ell_grad >= -1e-8)
    assert np.all(report.ell_beta >= -1e-8)
    assert np.all(report.lhs <= report.rhs)
    assert report.C == 0.0
    assert not report.partial
    df = report.to_frame()
    assert list(df.columns) == ["m", "t", "psi", "ell_grad", "ell_beta", "lhs", "rhs"]
    assert len(df) == 33


@pytest.mark.slow
@pytest.mark.parametrize("name", ["stefan", "porous_medium", "hele_shaw"])
def test_energy_inequality_acceptance(name):
    traj = solve(preset_problem(name), SolverParams(eps=1e-2, nu=1e-2, n=32, M=512))
    report = energy_report(traj)
    assert report.ok, report.violations


def test_galerkin_initial_psi_below_nodal_potential(stefan_run):
    psi0 = eta_potential(stefan_run, 0)
    assert 0.0 <= psi0 <= stefan_run.init.initial_potential + 1e-10


def test_chain_rule_single_step_arithmetic(linear_run):
    slack = chain_rule_slack(linear_run)
    z, u = linear_run.z, linear_run.u
    factor = 1.0 / (gamma(1.5) * gamma(1.5))
    expected = factor * float(np.dot(z[1] - z[0], u[1])) - (eta_potential(linear_run, 1) - eta_potential(linear_run, 0))
    assert slack[0] == 0.0
    assert slack[1] == pytest.approx(expected, rel=1e-9, abs=1e-12)


def test_chain_rule_holds_for_linear_problem(linear_run):
    tol = chain_tolerance(linear_run)
    assert chain_rule_check(linear_run) >= -tol
    assert chain_rule_check(linear_run, built_in("identity")) >= -tol


def test_lq_bound(stefan_run):
    report = lq_bound(stefan_run)
    assert report.q == 3.0
    assert report.norm > 0.0
    assert report.max_w <= 1.0 / stefan_run.params.eps
    assert report.norm <= report.holder_bound * (1 + 1e-12)
    assert report.trace.shape == (33,)
    assert np.all(report.trace >= 0.0)
    assert set(report.to_dict()) == {"q", "norm", "max_w", "holder_bound", "max_trace"}


def test_increment_modulus(stefan_run):
    df = increment_modulus(stefan_run, [0, 1, 4, 100])
    assert list(df["lag"]) == [0, 1, 4]
    assert df["modulus"].iloc[0] == 0.0
    assert np.all(df["modulus"].iloc[1:] > 0.0)
    assert df["lag_time"].iloc[2] == pytest.approx(4 * stefan_run.h)


def test_diagnostics_summary_is_serialisable(stefan_run):
    summary = diagnostics_summary(stefan_run)
    assert summary["truncation_level"] == pytest.approx(100.0)
    assert summary["energy"]["violations"] == []
    assert math.isfinite(summary["max_abs_w"])
    assert "pairing_bound" in summary["initial_data"]
    assert canonical_json(summary)


def test_chain_rule_deficit_shrinks_under_refinement():
    spec = preset_problem("linear_heat", u0="mode(i=1)")
    deficits = []
    for M in (16, 32, 64, 128):
        traj = solve(spec, SolverParams(eps=1e-6, nu=1e-6, n=1, M=M, tol=1e-12))
        worst = chain_rule_check(traj, built_in("identity"))
        assert worst >= -chain_tolerance(traj)
        deficits.append(max(0.0, -worst))
    assert all(b <= a + 1e-8 for a, b in zip(deficits, deficits[1:]))


def test_gradient_term_is_quadratic_in_u(stefan_run):
    base = energy_report(stefan_run)
    doubled = energy_report(replace(stefan_run, u=2.0 * stefan_run.u))
    np.testing.assert_allclose(doubled.ell_grad, 4.0 * base.ell_grad, rtol=1e-12, atol=1e-14)
    series = stefan_run.u[:, 0]
    pair, h = stefan_run.spec.pair, stefan_run.h
    assert positive_type_form(pair, h, 2.0 * series) == pytest.approx(4.0 * positive_type_form(pair, h, series))


def test_energy_report_flags_exceeded_bound(stefan_run):
    report = energy_report(replace(stefan_run, u=100.0 * stefan_run.u))
    assert not report.ok
    assert any(v.startswith("energy bound exceeded") for v in report.violations)
    assert np.any(report.lhs > report.rhs)
