import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from stochot.measures import (
    DiscreteMeasure,
    GaussianMixture,
    check_simplex,
    empirical_from,
    empirical_wrap,
    load_measure,
    load_points,
    make_gaussian_mixture,
    make_rng,
    random_gaussian_mixture,
    sample,
    save_points,
)


def test_zero_rotation_gives_three_identity():
    gm = make_gaussian_mixture(np.zeros((1, 3)), [np.zeros((3, 3))], 3)
    np.testing.assert_array_equal(gm.covariances[0], 3.0 * np.eye(3))


def test_identity_rotation():
    gm = make_gaussian_mixture(np.zeros((1, 3)), [np.eye(3)], 3)
    np.testing.assert_allclose(gm.covariances[0], 3.02 * np.eye(3), rtol=0, atol=1e-15)


def test_mixture_uniform_weights_and_errors():
    gm = random_gaussian_mixture(make_rng(0), n_components=3, dim=3)
    np.testing.assert_allclose(gm.mixture_weights, np.full(3, 1 / 3))
    with pytest.raises(ValueError):
        make_gaussian_mixture(np.zeros((1, 3)), [np.zeros((3, 2))], 3)
    with pytest.raises(ValueError):
        make_gaussian_mixture(np.zeros((1, 0)), [], 0)


def test_component_means_converge():
    rng = make_rng(3)
    gm = random_gaussian_mixture(rng)
    n = 10**5
    comp = rng.choice(3, size=n, p=gm.mixture_weights)
    z = rng.standard_normal((n, 3))
    pts = gm.means[comp] + np.einsum("nij,nj->ni", gm._chol[comp], z)
    for k in range(3):
        sel = pts[comp == k]
        sd = np.sqrt(np.diag(gm.covariances[k]) / len(sel))
        assert np.all(np.abs(sel.mean(axis=0) - gm.means[k]) <= 3 * sd)


def test_sample_mean_single_component():
    gm = GaussianMixture(np.zeros((1, 3)), 3.0 * np.eye(3)[None], np.ones(1))
    pts = gm.draw_many(make_rng(1), 10**5)
    assert np.all(np.abs(pts.mean(axis=0)) <= 0.02)


def test_sample_single_atom_and_determinism():
    p = np.array([0.3, -1.0])
    s = empirical_wrap(DiscreteMeasure(p[None], [1.0]))
    r = make_rng(5)
    for _ in range(20):
        np.testing.assert_array_equal(sample(s, r), p)
    gm = random_gaussian_mixture(make_rng(0))
    a = [sample(gm, r1) for r1 in [make_rng(9)] for _ in range(100)]
    r2 = make_rng(9)
    b = [sample(gm, r2) for _ in range(100)]
    np.testing.assert_array_equal(np.array(a), np.array(b))


def test_non_spd_covariance_rejected():
    with pytest.raises(ValueError):
        GaussianMixture(np.zeros((1, 2)), np.array([[[1.0, 2.0], [2.0, 1.0]]]), [1.0])
    with pytest.raises(ValueError):
        GaussianMixture(np.zeros((1, 2)), np.array([[[1.0, 0.5], [0.0, 1.0]]]), [1.0])


def test_empirical_wrap_frequencies():
    m = DiscreteMeasure(np.array([[0.0], [1.0]]), [0.5, 0.5])
    draws = empirical_wrap(m).draw_many(make_rng(2), 10**4)
    assert 0.48 <= np.mean(draws[:, 0] == 0.0) <= 0.52
    m = DiscreteMeasure(np.array([[0.0], [1.0]]), [1.0, 0.0])
    assert not np.any(empirical_wrap(m).draw_many(make_rng(2), 10**4)[:, 0] == 1.0)


def test_empirical_from():
    gm = GaussianMixture(np.array([[2.0]]), np.ones((1, 1, 1)), [1.0])
    one = empirical_from(gm, 1, make_rng(0))
    assert one.size == 1 and one.weights[0] == 1.0
    hundred = empirical_from(gm, 100, make_rng(0))
    assert np.all(hundred.weights == 0.01)
    big = empirical_from(gm, 10**4, make_rng(0))
    assert abs(big.atoms.mean() - 2.0) <= 4 / np.sqrt(10**4)
    with pytest.raises(ValueError):
        empirical_from(gm, 0, make_rng(0))


def test_empirical_from_is_deterministic():
    gm = random_gaussian_mixture(make_rng(0))
    a = empirical_from(gm, 50, make_rng(77))
    b = empirical_from(gm, 50, make_rng(77))
    assert a.atoms.tobytes() == b.atoms.tobytes()


def test_wrap_of_empirical_chi_square():
    gm = random_gaussian_mixture(make_rng(0))
    m = empirical_from(gm, 10, make_rng(1))
    draws = empirical_wrap(m).draw_many(make_rng(2), 10**5)
    idx = [np.flatnonzero(np.all(m.atoms == d, axis=1))[0] for d in draws[:2000]]
    counts = np.bincount(idx, minlength=10)
    assert stats.chisquare(counts).pvalue > 0.01


def test_simplex_tolerance():
    w = check_simplex([0.5, 0.5 + 5e-10])
    assert abs(w.sum() - 1) <= 1e-12
    with pytest.raises(ValueError):
        check_simplex([0.5, 0.6])
    with pytest.raises(ValueError):
        check_simplex([1.5, -0.5])
    with pytest.raises(ValueError):
        DiscreteMeasure(np.zeros((2, 1)), [1.0])


def test_measure_is_immutable():
    m = DiscreteMeasure.uniform(np.arange(3.0))
    with pytest.raises(ValueError):
        m.weights[0] = 1.0


def test_rng_streams():
    a = make_rng(4, 0).random(5)
    b = make_rng(4, 1).random(5)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, make_rng(4, 0).random(5))
    with pytest.raises(ValueError):
        make_rng(-1)


def test_point_file_round_trip(tmp_path):
    pts = make_rng(0).standard_normal((7, 3))
    save_points(tmp_path / "p.txt", pts)
    np.testing.assert_array_equal(load_points(tmp_path / "p.txt"), pts)
    (tmp_path / "w.txt").write_text("0.25\n0.75\n")
    save_points(tmp_path / "q.txt", pts[:2])
    m = load_measure(tmp_path / "q.txt", tmp_path / "w.txt")
    np.testing.assert_array_equal(m.weights, [0.25, 0.75])
    (tmp_path / "bad.txt").write_text("1 2\n3\n")
    with pytest.raises(ValueError):
        load_points(tmp_path / "bad.txt")


@given(st.lists(st.floats(0.01, 10.0), min_size=1, max_size=20))
def test_constructed_measures_are_simplices(raw):
    w = np.array(raw) / np.sum(raw)
    m = DiscreteMeasure(np.zeros((len(w), 1)), w)
    assert abs(m.weights.sum() - 1.0) <= 1e-12
    assert m.weights.min() >= 0
