import math
from fractions import Fraction

import numpy as np
import pytest

from stochot.continuous import (
    EXP_GUARD,
    Kernel,
    KernelExpansion,
    NumericalOverflowError,
    SemiDiscreteProxy,
    dual_integrand_f,
    eval_u,
    eval_v,
    kernel_sgd_solve,
    kernel_sgd_step,
    median_bandwidth,
    weighted_rel_error,
)
from stochot.costs import squared_euclidean
from stochot.discrete import SolveConfig
from stochot.measures import DiscreteMeasure, GaussianMixture, make_rng
from stochot.oracle import finite_diff_grad

c2 = squared_euclidean()


def _expansion(eps=0.1, step_c=0.5, r=1e4, sigma=1.0, dim=1):
    return KernelExpansion(Kernel(sigma), Kernel(sigma), dim, dim, eps, step_c, r)


def _gauss(mean=0.0, var=1.0):
    return GaussianMixture(np.array([[mean]]), np.array([[[var]]]), np.ones(1))


def test_kernel_properties():
    k = Kernel(0.7)
    pts = make_rng(0).standard_normal((6, 2))
    K = k(pts, pts)
    np.testing.assert_allclose(np.diag(K), 1.0)
    np.testing.assert_array_equal(K, K.T)
    assert np.all((K > 0) & (K <= 1))
    with pytest.raises(ValueError):
        Kernel(0.0)


def test_eval_empty_and_single():
    exp = _expansion()
    assert eval_u(exp, [0.3]) == 0.0 and eval_v(exp, [1.0]) == 0.0
    exp.append(2.0, [0.5], [-1.0])
    assert eval_u(exp, [0.5]) == 2.0
    assert eval_v(exp, [-1.0]) == 2.0


def test_eval_matches_exact_summation():
    rng = make_rng(1)
    exp = _expansion(sigma=0.8, dim=2)
    for _ in range(50):
        exp.append(rng.standard_normal(), rng.standard_normal(2), rng.standard_normal(2))
    p = rng.standard_normal(2)
    exact = sum(
        Fraction(float(a)) * Fraction(math.exp(-float(np.sum((x - p) ** 2)) / 0.64))
        for a, x in zip(exp.alphas, exp.xs)
    )
    assert eval_u(exp, p) == pytest.approx(float(exact), rel=1e-12)
    np.testing.assert_allclose(exp.u_many(p[None]), [eval_u(exp, p)], rtol=1e-12)


def test_first_step_coefficient():
    exp = _expansion(eps=0.2, step_c=0.5)
    kernel_sgd_step(exp, [1.0], [1.0], c2)
    assert exp.alphas[0] == 0.0
    exp = _expansion(eps=0.2, step_c=0.5)
    kernel_sgd_step(exp, [0.0], [1.5], c2)
    assert exp.alphas[0] == pytest.approx(0.5 * (1 - math.exp(-2.25 / 0.2)), rel=1e-15)


def test_clamp_bounds_coefficients():
    exp = _expansion(eps=1.0, step_c=0.5, r=2.0)
    exp.append(5.0, [0.0], [0.0])
    exp.k = 1
    kernel_sgd_step(exp, [0.0], [0.0], c2)
    assert exp.alphas[1] == pytest.approx(-2.0 * 0.5 / math.sqrt(2))


def test_overflow_guard():
    exp = _expansion(eps=1e-3, step_c=1.0)
    exp.append(1.0, [0.0], [0.0])
    exp.k = 1
    with pytest.raises(NumericalOverflowError):
        kernel_sgd_step(exp, [0.0], [0.0], c2)
    with pytest.raises(FloatingPointError):
        dual_integrand_f(None, None, EXP_GUARD, 1.0, 0.0, 1.0)


def test_quadratic_cost_of_steps():
    rng = make_rng(2)
    exp = _expansion()
    calls = 0
    for _ in range(1000):
        calls += 2 * exp.n
        kernel_sgd_step(exp, rng.standard_normal(1), rng.standard_normal(1), c2)
    assert calls == 1000 * 999


def test_dual_integrand_examples():
    assert dual_integrand_f(None, None, 0.0, 0.0, 0.0, 0.3) == pytest.approx(-0.3)
    assert dual_integrand_f(None, None, 1.0, 0.5, 1.5, 0.3) == pytest.approx(1.5 - 0.3)
    rng = make_rng(3)
    for _ in range(20):
        u, v, c = rng.standard_normal(3)
        eps = 0.5
        fd = finite_diff_grad(lambda t: dual_integrand_f(None, None, t[0], v, c, eps), np.array([u]))[0]
        assert fd == pytest.approx(1 - math.exp((u + v - c) / eps), rel=1e-8, abs=1e-9)


def test_entries_are_immutable():
    rng = make_rng(4)
    exp = _expansion()
    for _ in range(5):
        kernel_sgd_step(exp, rng.standard_normal(1), rng.standard_normal(1), c2)
    snap = (exp.alphas.copy(), exp.xs.copy(), exp.ys.copy())
    for _ in range(2000):
        kernel_sgd_step(exp, rng.standard_normal(1), rng.standard_normal(1), c2)
    assert exp.alphas[:5].tobytes() == snap[0].tobytes()
    assert exp.xs[:5].tobytes() == snap[1].tobytes()
    with pytest.raises(ValueError):
        exp.alphas[0] = 1.0


def test_zero_iterations():
    mu, nu = _gauss(), _gauss(1.0, 0.5)
    cfg = SolveConfig(eps=0.5, step_c=0.1, seed=0)
    exp, tr = kernel_sgd_solve(mu, nu, c2, (Kernel(1.0), Kernel(1.0)), 0.5, cfg, make_rng(0),
                               k_max=0, holdout=20000)
    assert exp.n == 0 and exp.u(0.3) == 0.0 and exp.v(-1.0) == 0.0
    hold = make_rng(0, 2)
    hx, hy = mu.draw_many(hold, 20000), nu.draw_many(hold, 20000)
    expected = -0.5 * np.mean(np.exp(-((hx - hy) ** 2).ravel() / 0.5))
    assert tr.last.objective == pytest.approx(expected, rel=1e-12)


def test_self_transport_swap_symmetry():
    # with mu = nu the dual is symmetric in (u, v): training on swapped pairs
    # must produce u and v with their roles exchanged, coefficient for coefficient
    rng = make_rng(1)
    xs, ys = rng.standard_normal((300, 1)), rng.standard_normal((300, 1))
    a, b = _expansion(sigma=1.5), _expansion(sigma=1.5)
    for x, y in zip(xs, ys):
        kernel_sgd_step(a, x, y, c2)
        kernel_sgd_step(b, y, x, c2)
    np.testing.assert_array_equal(a.alphas, b.alphas)
    pts = make_rng(2).standard_normal((50, 1))
    np.testing.assert_allclose(a.u_many(pts), b.v_many(pts), rtol=1e-13, atol=1e-14)


def test_csv_round_trip(tmp_path):
    rng = make_rng(6)
    exp = _expansion(dim=2)
    for _ in range(30):
        kernel_sgd_step(exp, rng.standard_normal(2), rng.standard_normal(2), c2)
    exp.to_csv(tmp_path / "e.csv")
    back = KernelExpansion.from_csv(tmp_path / "e.csv", exp.kernel_x, exp.kernel_y, 0.1, 0.5)
    assert back.alphas.tobytes() == exp.alphas.tobytes()
    assert back.xs.tobytes() == exp.xs.tobytes() and back.k == exp.k
    assert (tmp_path / "e.csv").read_text().splitlines()[0] == "k,alpha,x0,x1,y0,y1"


def test_truncation_skips_negligible_coefficients():
    exp = KernelExpansion(Kernel(1.0), Kernel(1.0), 1, 1, 0.1, 0.5, truncate=True)
    kernel_sgd_step(exp, [1.0], [1.0], c2)
    assert exp.k == 1 and exp.n == 0


def test_weighted_error_ignores_constants():
    ref = make_rng(7).standard_normal(100)
    assert weighted_rel_error(ref + 4.0, ref) == pytest.approx(0.0, abs=1e-12)
    assert weighted_rel_error(np.zeros(100), ref) == pytest.approx(1.0)


def test_proxy_is_smoothed_ctransform():
    nu = DiscreteMeasure.uniform(np.array([[0.0], [1.0]]))
    proxy = SemiDiscreteProxy(np.array([0.0, 0.5]), nu, c2, 0.2)
    x = 0.3
    expected = -0.2 * math.log(0.5 * math.exp(-0.09 / 0.2) + 0.5 * math.exp(-(0.49 - 0.5) / 0.2))
    assert proxy.u_many([[x]])[0] == pytest.approx(expected, rel=1e-14)


def test_median_bandwidth_of_standard_normal():
    # median |X - X'| for X, X' iid N(0,1) is sqrt(2) * 0.6745
    s = median_bandwidth(_gauss(), make_rng(8), n=2000)
    assert s == pytest.approx(math.sqrt(2) * 0.6745, rel=0.05)
