import math

import numpy as np
import pytest
from scipy.optimize import brentq

from graphs import beta_q, built_in, regularized
from spectral import (
    BasisParameterError,
    Domain,
    apply_A,
    damped_newton,
    eigenpairs,
    eta_solve,
    h_norm,
    inner,
    interval,
    lp_norm,
    nodal_frame,
    nodal_map,
    pad,
    project,
    rectangle,
    relaxed_iteration,
    synth,
    v_norm,
    vstar_norm,
)


def test_first_eigenvalues_and_poincare_constant():
    b1 = eigenpairs(interval(1.0), 4)
    assert b1.lambdas[0] == pytest.approx(math.pi ** 2)
    assert b1.lambdas[0] == pytest.approx(9.869604, rel=1e-7)
    assert b1.c_V == pytest.approx(0.318310, rel=1e-6)
    b2 = eigenpairs(rectangle(1.0, 1.0), 4)
    assert b2.lambdas[0] == pytest.approx(19.739209, rel=1e-7)


def test_rectangle_modes_sorted_by_eigenvalue_then_index():
    b = eigenpairs(rectangle(1.0, 1.0), 4)
    assert [tuple(ix) for ix in b.indices] == [(1, 1), (1, 2), (2, 1), (2, 2)]
    assert np.all(np.diff(b.lambdas) >= 0)


@pytest.mark.parametrize("domain", [interval(1.0), interval(2.5), rectangle(1.0, 2.0)])
def test_discrete_orthonormality(domain):
    b = eigenpairs(domain, 6)
    gram = b.E.T @ (b.weights[:, None] * b.E)
    np.testing.assert_allclose(gram, np.eye(6), atol=1e-12)


def test_project_constant_function():
    b = eigenpairs(interval(1.0), 3, oversample=500)
    c = project(b, np.ones(b.node_count))
    expected = [2 * math.sqrt(2) / math.pi, 0.0, 2 * math.sqrt(2) / (3 * math.pi)]
    assert c[0] == pytest.approx(expected[0], rel=1e-5)
    assert c[1] == pytest.approx(0.0, abs=1e-12)
    assert c[2] == pytest.approx(expected[2], rel=1e-5)
    assert c[0] == pytest.approx(0.900316, rel=1e-5)


def test_synth_then_project_is_identity(unit_basis):
    rng = np.random.default_rng(1)
    u = rng.normal(size=unit_basis.n)
    np.testing.assert_allclose(project(unit_basis, synth(unit_basis, u)), u, atol=1e-12)


def test_nodal_map_square_of_first_mode(unit_basis):
    e1 = np.eye(unit_basis.n)[0]
    out = nodal_map(unit_basis, e1, lambda r: r ** 2)
    assert out[0] == pytest.approx(8 * math.sqrt(2) / (3 * math.pi), rel=1e-10)
    # fine-grid quadrature of the same coefficient
    x = (np.arange(20000) + 0.5) / 20000
    fine = np.mean((math.sqrt(2) * np.sin(math.pi * x)) ** 3)
    assert out[0] == pytest.approx(fine, abs=1e-8)


def test_nodal_map_constant(unit_basis):
    out = nodal_map(unit_basis, np.zeros(unit_basis.n), lambda r: np.full_like(r, 3.0))
    np.testing.assert_allclose(out, project(unit_basis, np.full(unit_basis.node_count, 3.0)))


def test_norms(unit_basis):
    u = np.arange(1.0, unit_basis.n + 1)
    assert apply_A(unit_basis, u) == pytest.approx(unit_basis.lambdas * u)
    assert h_norm(unit_basis, u) == pytest.approx(np.linalg.norm(u))
    assert v_norm(unit_basis, u) ** 2 == pytest.approx(np.sum(unit_basis.lambdas * u ** 2))
    assert vstar_norm(unit_basis, u) ** 2 == pytest.approx(np.sum(u ** 2 / unit_basis.lambdas))
    f = synth(unit_basis, u)
    assert lp_norm(unit_basis, f, 2.0) == pytest.approx(h_norm(unit_basis, u))
    assert lp_norm(unit_basis, f, math.inf) == pytest.approx(np.max(np.abs(f)))
    assert inner(unit_basis, f, f) == pytest.approx(h_norm(unit_basis, u) ** 2)


def test_pad_and_frame(unit_basis):
    assert list(pad([1.0, 2.0], 4)) == [1.0, 2.0, 0.0, 0.0]
    assert list(pad([1.0, 2.0, 3.0], 2)) == [1.0, 2.0]
    df = nodal_frame(unit_basis, np.zeros(unit_basis.node_count), "u")
    assert list(df.columns) == ["x", "u"]
    df2 = nodal_frame(eigenpairs(rectangle(), 2), np.zeros(eigenpairs(rectangle(), 2).node_count))
    assert list(df2.columns) == ["x", "y", "value"]


def test_basis_parameter_errors(unit_basis):
    with pytest.raises(BasisParameterError):
        eigenpairs(interval(1.0), 0)
    with pytest.raises(BasisParameterError):
        Domain((1.0, 1.0, 1.0))
    with pytest.raises(BasisParameterError):
        rectangle(1.0, -2.0)
    with pytest.raises(BasisParameterError):
        synth(unit_basis, np.zeros(unit_basis.n + 1))
    with pytest.raises(BasisParameterError):
        project(unit_basis, np.zeros(3))


def test_damped_newton_and_relaxation():
    x, history, ok = damped_newton(lambda x: x ** 3 - 8.0, lambda x: np.diag(3 * x ** 2), np.array([5.0]), 1e-12, 50)
    assert ok
    assert x[0] == pytest.approx(2.0)
    assert history[-1] <= 1e-12

    x, history, ok = relaxed_iteration(lambda x: 2.0 * x - 1.0, np.array([3.0]), 0.4, 1e-12, 500)
    assert ok
    assert x[0] == pytest.approx(0.5)


def test_eta_solve_single_mode_against_scalar_root():
    b = eigenpairs(interval(1.0), 1)
    alpha = built_in("heaviside")
    nu, eps = 0.1, 0.1
    z = np.array([0.4])
    u = eta_solve(b, z, nu, eps, alpha)

    def residual(c):
        return float(project(b, regularized(alpha, nu, eps, c * b.E[:, 0]))[0]) - z[0]

    oracle = brentq(residual, -50.0, 50.0, xtol=1e-14)
    assert u[0] == pytest.approx(oracle, abs=1e-8)


def test_eta_solve_multimode_residual():
    b = eigenpairs(interval(1.0), 8)
    alpha = built_in("stefan")
    rng = np.random.default_rng(5)
    z = rng.normal(size=8)
    u = eta_solve(b, z, 0.05, 0.02, alpha, tol=1e-10)
    resid = nodal_map(b, u, lambda r: regularized(alpha, 0.05, 0.02, r)) - z
    assert np.linalg.norm(resid) <= 1e-10


def test_eta_solve_rejects_nonpositive_parameters(unit_basis):
    with pytest.raises(BasisParameterError):
        eta_solve(unit_basis, np.zeros(unit_basis.n), 0.0, 0.1, built_in("identity"))


def test_damped_newton_accepts_rounding_level_stall():
    # the residual cannot go below ~1e-11 in double precision
    def fun(x):
        return 1e6 * (x - 0.1) + 3e-10

    x, history, ok = damped_newton(fun, lambda x: np.array([[1e6]]), np.array([0.0]), 1e-14, 20)
    assert ok
    assert history[-1] > 1e-14
    assert x[0] == pytest.approx(0.1 - 3e-16, abs=1e-16)


def test_damped_newton_reports_failure_without_root():
    x, history, ok = damped_newton(lambda x: x ** 2 + 1.0, lambda x: np.diag(2 * x), np.array([0.5]), 1e-12, 50)
    assert not ok
    assert history[-1] >= 1.0


@pytest.mark.parametrize("domain", [interval(1.0), rectangle(1.0, 2.0)])
def test_parseval_for_band_limited_data(domain):
    b = eigenpairs(domain, 8)
    rng = np.random.default_rng(3)
    u = np.zeros(8)
    u[:5] = rng.normal(size=5)
    f = synth(b, u)
    c = project(b, f)
    assert h_norm(b, c) == pytest.approx(lp_norm(b, f, 2.0), rel=1e-12)
    assert h_norm(b, c) == pytest.approx(np.linalg.norm(u), rel=1e-12)


def test_stiffness_pairs_nonnegatively_with_beta_q(unit_basis):
    beta = built_in("arctan")
    rng = np.random.default_rng(11)
    scale = 1.0 / np.arange(1, unit_basis.n + 1) ** 2
    for _ in range(20):
        u = 2.0 * rng.normal(size=unit_basis.n) * scale
        w = project(unit_basis, beta_q(beta, 0.1, 3.0, synth(unit_basis, u)))
        assert float(apply_A(unit_basis, u) @ w) >= 0.0


def test_eta_solve_root_does_not_depend_on_guess():
    b = eigenpairs(interval(1.0), 8)
    alpha = built_in("stefan")
    rng = np.random.default_rng(7)
    z = rng.normal(size=8)
    base = eta_solve(b, z, 0.05, 0.02, alpha, tol=1e-12)
    for _ in range(3):
        u = eta_solve(b, z, 0.05, 0.02, alpha, tol=1e-12, guess=rng.normal(size=8))
        np.testing.assert_allclose(u, base, atol=1e-9)


def test_projection_quadrature_is_second_order():
    exact = 2 * math.sqrt(2) / math.pi
    errors = []
    for oversample in (2, 4, 8):
        b = eigenpairs(interval(1.0), 3, oversample=oversample)
        c = project(b, np.ones(b.node_count))
        N = b.node_count
        assert c[0] == pytest.approx(math.sqrt(2) / (N * math.sin(math.pi / (2 * N))), rel=1e-12)
        errors.append(abs(c[0] - exact))
    assert errors[0] == pytest.approx(0.010368, rel=1e-3)
    for a, b in zip(errors, errors[1:]):
        assert 3.5 <= a / b <= 4.5
