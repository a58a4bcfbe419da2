import math

import numpy as np
import pandas as pd
import pytest

import continuation
from continuation import (
    _scaling_ok,
    StudyRefused,
    commutation_check,
    eps_study,
    gap_norms,
    h_study,
    mosco_desk_check,
    n_study,
    nu_study,
    perturbed,
    run_many,
    uniqueness_experiment,
    window_bound,
)
from graphs import built_in
from kernels import mittag_leffler
from presets import preset_problem
from problem import ProblemSpecError
from solver import SolverParams
from spectral import eigenpairs, interval

SMALL = SolverParams(eps=1e-2, nu=1e-2, n=4, M=8)


def test_eps_study_table():
    table = eps_study(preset_problem("stefan"), SMALL, [0.08, 0.04, 0.02])
    assert list(table.columns[:3]) == ["eps", "next", "hash"]
    assert len(table) == 2
    assert (table["status"] == "ok").all()
    assert np.all(table["gap_l2"] > 0)
    assert np.all(np.isfinite(table["gap_l32"]))
    assert math.isnan(table["ratio"].iloc[0])
    assert table["hash"].iloc[0] != table["hash"].iloc[1]


@pytest.mark.slow
def test_eps_and_nu_gaps_shrink_on_stefan():
    params = SolverParams(eps=1e-2, nu=1e-2, n=8, M=32)
    spec = preset_problem("stefan")
    for table in (eps_study(spec, params, [0.08, 0.04, 0.02, 0.01, 0.005]),
                  nu_study(spec, params, [0.08, 0.04, 0.02, 0.01, 0.005])):
        gaps = table["gap_l2"].to_numpy()
        assert np.all(gaps[1:] <= 0.9 * gaps[:-1])


def test_nu_study_records_nu_energy():
    table = nu_study(preset_problem("stefan"), SMALL, [0.04, 0.02, 0.01])
    assert "nu_u_sq" in table.columns
    assert np.all(table["nu_u_sq"] > 0)
    assert table["nu_u_sq"].iloc[1] < table["nu_u_sq"].iloc[0]


def test_n_study_exact_beyond_band():
    spec = preset_problem("linear_heat", u0="mode(i=1)")
    params = SolverParams(eps=1e-2, nu=1e-2, n=2, M=8, tol=1e-12)
    table = n_study(spec, params, [2, 4, 8])
    assert np.all(table["gap_l2"] <= 1e-10)


def test_h_study_against_mittag_leffler():
    spec = preset_problem("linear_heat", T=1.0, u0="mode(i=1)")
    params = SolverParams(eps=1e-8, nu=1e-8, n=1, M=8, tol=1e-12)
    exact = mittag_leffler(-math.pi ** 2, 0.5)
    table = h_study(spec, params, [32, 64, 128], reference=exact)
    assert list(table["M"]) == [32, 64, 128]
    assert np.all(table["error"].diff().iloc[1:] < 0)
    assert np.all(table["order"].iloc[1:] > 0)
    assert math.isnan(table["order"].iloc[0])


def test_h_study_without_reference_uses_cauchy_gaps():
    spec = preset_problem("linear_heat", u0="mode(i=1)")
    params = SolverParams(eps=1e-2, nu=1e-2, n=1, M=8)
    table = h_study(spec, params, [16, 32, 64])
    assert np.isfinite(table["error"].iloc[0])
    assert math.isnan(table["error"].iloc[-1])


def test_studies_refuse_invalid_problem():
    with pytest.raises(ProblemSpecError):
        eps_study(preset_problem("linear_heat", q=2.0), SMALL, [0.1, 0.05])


def test_mosco_desk_check_monotone():
    basis = eigenpairs(interval(1.0), 8)
    u = np.sin(2 * np.pi * basis.nodes[:, 0])
    table = mosco_desk_check(built_in("heaviside"), [0.2, 0.1, 0.05, 0.025], {"u": u, "shift": u + 0.3},
                             basis.nodes, basis.weights)
    assert len(table) == 8
    assert table["monotone"].all()
    for _, rows in table.groupby("sample"):
        gaps = rows["gap"].to_numpy()
        assert np.all(gaps >= -1e-12)
        assert np.all(np.diff(gaps) <= 1e-12)
        assert rows["psi"].nunique() == 1


def test_uniqueness_experiment_on_lipschitz_demo():
    spec = preset_problem("lipschitz_demo")
    params = SolverParams(eps=1e-2, nu=1e-2, n=4, M=16)
    result = uniqueness_experiment(spec, params, [0.1, 0.05, 0.025, 0.0125])
    assert result.tau == pytest.approx(math.pi / 8, abs=1e-12)
    assert result.windows == 3
    assert len(result.table) == 4 * 3
    ratios = result.scaling["ratio"].to_numpy()[1:]
    assert np.all((ratios >= 0.4) & (ratios <= 0.6))
    assert 0.9 <= result.exponent <= 1.1
    assert result.scaling_ok is True
    assert result.window_ok is True
    assert np.all(result.table["gronwall_constant"] <= result.window_bound)
    summary = result.to_dict()
    assert summary["tau_window"] == result.tau
    assert (summary["scaling_ok"], summary["window_ok"]) == (True, True)


def test_zero_perturbation_gives_identical_runs():
    spec = preset_problem("lipschitz_demo")
    params = SolverParams(eps=1e-2, nu=1e-2, n=4, M=8)
    result = uniqueness_experiment(spec, params, [0.0])
    assert result.identical_at_zero is True
    assert (result.table["norm"] == 0.0).all()
    assert result.scaling_ok is None
    assert result.ok


def test_window_bound_for_lipschitz_demo():
    spec = preset_problem("lipschitz_demo")
    exact = math.sqrt(math.pi / 8) / (1.0 - 1.0 / math.sqrt(2.0))
    assert window_bound(spec, SolverParams(eps=1e-12, nu=1e-12, n=4, M=8), math.pi / 8) == pytest.approx(exact)
    assert window_bound(spec, SMALL, math.inf) == math.inf


def test_scaling_check_rejects_nonlinear_growth():
    linear = pd.DataFrame({"delta": [0.1, 0.05, 0.025], "norm": [0.2, 0.1, 0.05], "status": ["ok"] * 3})
    assert _scaling_ok(linear, 1.0) is True
    quadratic = linear.assign(norm=[0.04, 0.01, 0.0025])
    assert _scaling_ok(quadratic, 2.0) is False
    failed = linear.assign(status=["ok", "failed", "ok"])
    assert _scaling_ok(failed, 1.0) is False
    assert _scaling_ok(linear.iloc[:1], math.nan) is None


def test_window_violation_is_flagged(monkeypatch):
    monkeypatch.setattr(continuation, "window_bound", lambda spec, params, tau: 1e-6)
    spec = preset_problem("lipschitz_demo")
    result = uniqueness_experiment(spec, SolverParams(eps=1e-2, nu=1e-2, n=4, M=8), [0.1, 0.05])
    assert result.window_ok is False
    assert not result.ok
    assert result.to_dict()["window_ok"] is False


def test_uniqueness_refused_without_window():
    with pytest.raises(StudyRefused):
        uniqueness_experiment(preset_problem("hele_shaw"), SMALL, [0.1])


def test_perturbed_shifts_first_mode():
    spec = preset_problem("linear_heat")
    basis = eigenpairs(spec.domain, 4)
    base, _ = spec.initial_fields(basis.nodes)
    moved, _ = perturbed(spec, 0.2).initial_fields(basis.nodes)
    np.testing.assert_allclose(moved - base, 0.2 * basis.E[:, 0])


def test_run_many_keeps_order_under_threads():
    spec = preset_problem("stefan")
    plist = [SolverParams(eps=e, nu=1e-2, n=4, M=6) for e in (0.05, 0.02, 0.01)]
    serial = run_many([spec] * 3, plist, jobs=1)
    threaded = run_many([spec] * 3, plist, jobs=3)
    for a, b in zip(serial, threaded):
        assert np.array_equal(a.u, b.u)
        assert gap_norms(a, b)["gap_l2"] == 0.0


def test_commutation_check_reports_corners():
    out = commutation_check(preset_problem("stefan"), SMALL, [0.04, 0.02], [0.04, 0.02])
    assert set(out) == {"gap", "max_cauchy", "agree", "eps_first", "nu_first"}
    assert out["eps_first"] == [0.02, 0.04]
    assert out["nu_first"] == [0.04, 0.02]
    assert math.isfinite(out["gap"])
    assert math.isfinite(out["max_cauchy"])
