from decimal import Decimal, getcontext

import numpy as np
import pytest

from conftest import random_instance
from stochot.costs import build_cost_matrix, squared_euclidean
from stochot.measures import DiscreteMeasure, make_rng
from stochot.oracle import finite_diff_grad, reference_solve
from stochot.semidual import (
    barh,
    check_eps,
    chi_weights,
    dual_objective,
    grad_barh,
    kl_divergence,
    marginal_violation,
    primal_value,
    recover_plan,
    semidual_grad,
    semidual_objective,
    smoothed_ctransform,
    softmin,
)


def _softmin_decimal(r, nu, eps):
    getcontext().prec = 50
    e = Decimal(float(eps))
    s = sum(Decimal(float(w)) * (-Decimal(float(x)) / e).exp() for x, w in zip(r, nu))
    return float(-e * s.ln())


def test_softmin_examples():
    assert softmin([2.0], [1.0], 0.3) == pytest.approx(2.0, abs=1e-15)
    assert softmin([3.0, 1.0, 2.0], [1 / 3] * 3, 0.0) == 1.0
    expected = -np.log(0.5 + 0.5 * np.exp(-1.0))
    assert softmin([0.0, 1.0], [0.5, 0.5], 1.0) == pytest.approx(expected, rel=1e-15)
    assert softmin([0.0, 1.0], [0.5, 0.5], 1.0) == pytest.approx(
        _softmin_decimal([0.0, 1.0], [0.5, 0.5], 1.0), rel=1e-15)


def test_softmin_errors_and_zero_weights():
    with pytest.raises(ValueError):
        softmin([], [], 0.1)
    with pytest.raises(ValueError):
        softmin([1.0, 2.0], [0.0, 0.0], 0.1)
    with pytest.raises(ValueError):
        check_eps(-1.0)
    # a zero-weight atom is never the argmin and adds nothing to the sum
    assert softmin([0.0, 5.0], [0.0, 1.0], 0.0) == 5.0
    assert softmin([0.0, 5.0], [0.0, 1.0], 0.1) == pytest.approx(5.0, abs=1e-14)
    np.testing.assert_array_equal(chi_weights([0.0, 5.0], [0.0, 1.0], 0.0), [0.0, 1.0])


def test_softmin_matches_decimal_oracle():
    rng = make_rng(0)
    for _ in range(20):
        r = rng.uniform(-3, 3, 5)
        nu = rng.dirichlet(np.ones(5))
        eps = float(rng.choice([0.05, 0.3, 2.0]))
        assert softmin(r, nu, eps) == pytest.approx(_softmin_decimal(r, nu, eps), rel=1e-12, abs=1e-13)


def test_chi_examples():
    nu = np.array([0.2, 0.3, 0.5])
    np.testing.assert_allclose(chi_weights(np.full(3, 4.2), nu, 0.7), nu, rtol=1e-14)
    np.testing.assert_array_equal(chi_weights([3.0, 1.0, 2.0], nu, 0.0), [0.0, 1.0, 0.0])
    np.testing.assert_array_equal(chi_weights([1.0, 1.0, 2.0], nu, 0.0), [1.0, 0.0, 0.0])


def test_chi_is_softmin_gradient():
    rng = make_rng(1)
    r = rng.uniform(0, 2, 6)
    nu = rng.dirichlet(np.ones(6))
    fd = finite_diff_grad(lambda t: softmin(t, nu, 0.5), r)
    np.testing.assert_allclose(chi_weights(r, nu, 0.5), fd, rtol=1e-6)


def test_log_domain_stability():
    rng = make_rng(2)
    r = rng.uniform(0, 1e3, 50)
    nu = rng.dirichlet(np.ones(50))
    s = softmin(r, nu, 1e-6)
    chi = chi_weights(r, nu, 1e-6)
    assert np.isfinite(s) and np.all(np.isfinite(chi))
    assert s == pytest.approx(r.min(), abs=1e-3)
    assert chi.sum() == pytest.approx(1.0, abs=1e-12)


def _atoms(J, seed=0):
    rng = make_rng(seed)
    return DiscreteMeasure(rng.random((J, 2)), rng.dirichlet(np.ones(J)))


def test_barh_examples():
    c = squared_euclidean()
    x = np.array([0.3, 0.4])
    single = DiscreteMeasure(np.zeros((1, 2)), [1.0])
    assert barh(x, [7.0], single, c, 0.1) == pytest.approx(0.25 - 0.1, abs=1e-14)
    nu = _atoms(4)
    assert barh(x, np.zeros(4), nu, c, 0.0) == pytest.approx(c.pairwise(x[None], nu.atoms).min())


def test_barh_gradient_finite_differences():
    c = squared_euclidean()
    nu = _atoms(7, seed=3)
    x = np.array([0.5, 0.1])
    v = make_rng(4).standard_normal(7) * 0.1
    fd = finite_diff_grad(lambda t: barh(x, t, nu, c, 0.1), v)
    g = grad_barh(x, v, nu, c, 0.1)
    np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-9)
    nu5 = _atoms(5, seed=5)
    v5 = make_rng(6).standard_normal(5) * 0.05
    fd = finite_diff_grad(lambda t: barh(x, t, nu5, c, 0.05), v5)
    np.testing.assert_allclose(grad_barh(x, v5, nu5, c, 0.05), fd, rtol=1e-6, atol=1e-9)


def test_grad_barh_examples():
    c = squared_euclidean()
    single = DiscreteMeasure(np.zeros((1, 2)), [1.0])
    np.testing.assert_array_equal(grad_barh([1.0, 1.0], [3.0], single, c, 0.2), [0.0])
    g = grad_barh([0.2, 0.2], np.zeros(5), _atoms(5), c, 0.0)
    assert abs(g.sum()) <= 1e-15


def test_semidual_objective_examples(rng):
    C = np.array([[2.5]])
    one = DiscreteMeasure(np.zeros((1, 1)), [1.0])
    assert semidual_objective([4.0], one, one, C, 0.2) == pytest.approx(2.3, abs=1e-14)
    mu, nu, C = random_instance(rng, 4, 6)
    v = rng.standard_normal(6)
    base = semidual_objective(v, mu, nu, C, 0.1)
    assert semidual_objective(v + 3.7, mu, nu, C, 0.1) == pytest.approx(base, abs=1e-10)
    ref = reference_solve(mu, nu, C, 0.1)
    assert base <= ref.objective + 1e-12


def test_semidual_grad_matches_finite_differences(rng):
    mu, nu, C = random_instance(rng, 5, 4)
    v = rng.standard_normal(4) * 0.1
    fd = finite_diff_grad(lambda t: semidual_objective(t, mu, nu, C, 0.1), v)
    np.testing.assert_allclose(semidual_grad(v, mu, nu, C, 0.1), fd, rtol=1e-6, atol=1e-9)


def test_dual_objective_examples(rng):
    mu, nu, C = random_instance(rng, 5, 7)
    eps = 0.3
    expected = -eps * np.sum(np.exp(-C.entries / eps) * np.outer(mu.weights, nu.weights))
    assert dual_objective(np.zeros(5), np.zeros(7), mu, nu, C, eps) == pytest.approx(expected, rel=1e-14)
    v = rng.standard_normal(7)
    u = smoothed_ctransform(v, nu, C, eps)
    assert dual_objective(u, v, mu, nu, C, eps) == pytest.approx(
        semidual_objective(v, mu, nu, C, eps), rel=1e-10)
    one = DiscreteMeasure(np.zeros((1, 1)), [1.0])
    assert dual_objective([1.5], [0.0], one, one, [[1.5]], 0.1) == pytest.approx(1.4, abs=1e-14)
    with pytest.raises(ValueError):
        dual_objective(u, v, mu, nu, C, 0.0)


def test_ctransform_examples(rng):
    mu, nu, C = random_instance(rng, 6, 6)
    one = DiscreteMeasure(np.zeros((1, 2)), [1.0])
    C1 = C.entries[:, :1]
    np.testing.assert_allclose(smoothed_ctransform([0.0], one, C1, 0.1), C1[:, 0], rtol=1e-14)
    np.testing.assert_array_equal(smoothed_ctransform(np.zeros(6), nu, C, 0.0), C.entries.min(axis=1))


def test_double_transform_is_monotone(rng):
    for _ in range(10):
        mu, nu, C = random_instance(rng, 6, 6)
        eps = 0.1
        v = rng.standard_normal(6)
        h = semidual_objective(v, mu, nu, C, eps)
        for _ in range(5):
            u = smoothed_ctransform(v, nu, C, eps)
            v = smoothed_ctransform(u, mu, C.entries.T, eps)
            h_new = semidual_objective(v, mu, nu, C, eps)
            assert h_new >= h - 1e-12
            h = h_new


def test_recover_plan_examples(rng):
    one = DiscreteMeasure(np.zeros((1, 1)), [1.0])
    np.testing.assert_allclose(recover_plan([2.0], [0.0], one, one, [[2.0]], 0.1), [[1.0]])
    mu, nu, C = random_instance(rng, 5, 5)
    v = rng.standard_normal(5)
    u = smoothed_ctransform(v, nu, C, 0.2)
    plan = recover_plan(u, v, mu, nu, C, 0.2)
    np.testing.assert_allclose(plan.sum(axis=1), mu.weights, rtol=1e-12)
    ref = reference_solve(mu, nu, C, 0.2)
    u = smoothed_ctransform(ref.v_star, nu, C, 0.2)
    assert marginal_violation(recover_plan(u, ref.v_star, mu, nu, C, 0.2), mu, nu) <= 1e-8
    with pytest.raises(ValueError):
        recover_plan(u, v, mu, nu, C, 0.0)


def test_marginal_violation_examples(rng):
    mu, nu, C = random_instance(rng, 4, 6)
    assert marginal_violation(np.outer(mu.weights, nu.weights), mu, nu) == pytest.approx(0.0, abs=1e-15)
    assert marginal_violation(np.zeros((4, 6)), mu, nu) == pytest.approx(2.0)
    v = rng.standard_normal(6)
    u = smoothed_ctransform(v, nu, C, 0.1)
    viol = marginal_violation(recover_plan(u, v, mu, nu, C, 0.1), mu, nu)
    assert viol == pytest.approx(np.abs(semidual_grad(v, mu, nu, C, 0.1)).sum(), abs=1e-10)


def test_kl_examples(rng):
    mu, nu, C = random_instance(rng, 4, 3)
    assert kl_divergence(np.outer(mu.weights, nu.weights), mu, nu) == pytest.approx(-1.0, abs=1e-14)
    one = DiscreteMeasure(np.zeros((1, 1)), [1.0])
    assert kl_divergence([[1.0]], one, one) == -1.0
    nu0 = DiscreteMeasure(np.zeros((2, 1)), [1.0, 0.0])
    assert kl_divergence([[0.5, 0.5]], one, nu0) == np.inf


def test_strong_duality_at_reference(rng):
    mu, nu, C = random_instance(rng, 5, 5)
    eps = 0.1
    ref = reference_solve(mu, nu, C, eps)
    u = smoothed_ctransform(ref.v_star, nu, C, eps)
    plan = recover_plan(u, ref.v_star, mu, nu, C, eps)
    assert primal_value(plan, mu, nu, C, eps) == pytest.approx(ref.objective, rel=1e-6)
