import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from boundcut.density import (
    MAX_EXACT_N,
    BandwidthSchedule,
    EmptyClassError,
    bandwidth_at,
    class_kde_at,
    gaussian_kernel,
    generalized_kde,
    generalized_kde_at,
    kde,
    kde_at,
)
from boundcut.evaluation import simpson_weights
from boundcut.mixture import Dataset, Domain, Labeling, MixtureModel, sample_mixture

from conftest import labels, line


def test_kernel_closed_forms():
    assert gaussian_kernel(np.zeros(1), 1.0) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-15)
    assert gaussian_kernel(np.zeros(2), 1.0) == pytest.approx(1 / (2 * math.pi), abs=1e-15)
    assert gaussian_kernel(np.ones(1), 1.0) == pytest.approx(norm.pdf(1.0), abs=1e-15)
    assert gaussian_kernel(np.array([1.0, 2.0]), 0.5) == pytest.approx(
        norm.pdf(1.0, scale=0.5) * norm.pdf(2.0, scale=0.5), rel=1e-13
    )


def test_kernel_rejects_nonpositive_bandwidth():
    for h in (0.0, -1.0):
        with pytest.raises(ValueError):
            gaussian_kernel(np.zeros(1), h)


def test_bandwidth_schedule_values():
    assert bandwidth_at(BandwidthSchedule(beta=1 / 9, c=1.0), 512) == pytest.approx(0.5, abs=1e-15)
    s = BandwidthSchedule.default(d=1)
    assert s.beta == pytest.approx(1 / 9)
    assert s.beta < min(1 / 3, 1 / 8)


@given(st.integers(1, 10**6), st.floats(0.01, 0.124), st.floats(0.1, 10.0))
def test_bandwidth_decreasing(n, beta, c):
    s = BandwidthSchedule(beta=beta, c=c)
    assert s.at(2 * n) < s.at(n)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_default_schedule_is_feasible(d):
    s = BandwidthSchedule.default(d=d)
    assert s.beta < 1 / (d + 2) and s.beta < 1 / (4 * d + 4)


def test_schedule_rejects_infeasible_exponents():
    with pytest.raises(ValueError, match=r"1/\(4d\+4\)"):
        BandwidthSchedule(beta=0.125, c=1.0, d=1)
    with pytest.raises(ValueError, match=r"1/\(d\+2\*gamma\)"):
        BandwidthSchedule(beta=0.12, c=1.0, gamma=4.0, d=1)
    with pytest.raises(ValueError):
        BandwidthSchedule(beta=0.1, c=-1.0)
    with pytest.raises(ValueError):
        BandwidthSchedule(beta=0.1, c=1.0).at(0)
    with pytest.raises(ValueError):
        BandwidthSchedule(beta=0.1).at(10)


def test_auto_scale_is_mean_axis_std():
    pts = np.array([[0.0, 1.0], [2.0, 1.5], [4.0, -1.0]])
    data = Dataset(Domain(2, 10.0), pts)
    s = BandwidthSchedule.default(d=2).resolve(data)
    assert s.c == pytest.approx(np.mean(np.std(pts, axis=0, ddof=1)), rel=1e-15)


def test_kde_examples():
    assert kde_at(line([0.0]), 1.0, 0.0) == pytest.approx(0.398942, abs=5e-7)
    two = (norm.pdf(0) + norm.pdf(2)) / 2
    assert kde_at(line([0.0, 2.0]), 1.0, 0.0) == pytest.approx(two, abs=1e-15)
    assert two == pytest.approx(0.226466, abs=1e-6)  # quoted value is truncated, not rounded
    one = (norm.pdf(0) + norm.pdf(1)) / 2
    assert kde_at(line([0.0, 1.0]), 1.0, 0.0) == pytest.approx(one, abs=1e-15)
    assert one == pytest.approx(0.320456, abs=1e-6)


def test_kde_integrates_to_one():
    data = line(np.random.default_rng(0).normal(size=200))
    x, w = simpson_weights(-15, 15, 6001)
    assert np.dot(w, kde(data, 0.3, x[:, None])) == pytest.approx(1.0, abs=1e-3)


def test_kde_refuses_large_samples():
    data = Dataset(Domain(1, 1.0), np.zeros((MAX_EXACT_N + 1, 1)))
    with pytest.raises(ValueError):
        kde(data, 1.0, np.zeros((1, 1)))


def test_class_kde_examples():
    data = line([0.0, 1.0, 3.0])
    assert class_kde_at(data, labels(1, 1, 1), 1, 0.7, 0.2) == pytest.approx(kde_at(data, 0.7, 0.2), rel=1e-14)
    assert class_kde_at(line([0.0, 1.0]), labels(1, 2), 1, 1.0, 0.0) == pytest.approx(norm.pdf(0), abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(-5, 5), min_size=2, max_size=20),
    st.integers(0, 10**6),
    st.floats(0.05, 3.0),
    st.floats(-6, 6),
)
def test_class_kdes_mix_to_kde(xs, seed, h, x):
    lab = np.random.default_rng(seed).integers(1, 4, len(xs))
    lab[:3] = [1, 2, 3][: len(lab[:3])]
    labeling = Labeling.from_sequence(lab)
    data = line(xs)
    counts = labeling.counts()
    mix = sum(
        counts[i - 1] / data.n * class_kde_at(data, labeling, i, h, x)
        for i in range(1, labeling.q + 1)
        if counts[i - 1] > 0
    )
    assert mix == pytest.approx(kde_at(data, h, x), rel=1e-12, abs=1e-300)


def test_empty_class_is_reported():
    with pytest.raises(EmptyClassError):
        class_kde_at(line([0.0, 1.0]), Labeling(np.array([1, 1]), 2), 2, 1.0, 0.0)


def test_generalized_kde_examples():
    data = line([0.0, 1.0])
    assert generalized_kde_at(data, [1.0, 1.0], 1.0, 0.0) == pytest.approx(kde_at(data, 1.0, 0.0), rel=1e-15)
    val = (norm.pdf(0) + norm.pdf(1) / 2) / 2
    assert generalized_kde_at(data, [1.0, 2.0], 1.0, 0.0) == pytest.approx(val, abs=1e-15)
    assert val == pytest.approx(0.259964, abs=5e-7)
    assert generalized_kde_at(data, [2.5, 2.5], 1.0, 0.3) == pytest.approx(kde_at(data, 1.0, 0.3) / 2.5, rel=1e-14)
    with pytest.raises(ValueError):
        generalized_kde_at(data, [1.0, 0.0], 1.0, 0.0)


def test_generalized_kde_with_root_density_weights():
    model = MixtureModel.gaussians([[0.0]], [1.0])
    data, _ = sample_mixture(model, 20_000, 7)
    h = BandwidthSchedule.default().resolve(data).at(data.n)
    g = np.sqrt(kde(data, h, data.points))
    est = generalized_kde(data, g, h, np.zeros((1, 1)))[0]
    assert est == pytest.approx(math.sqrt(norm.pdf(0.0)), abs=0.02)


def test_kde_sup_error_halves_along_schedule(two_gauss):
    grid = np.linspace(-4, 4, 801)[:, None]
    f = two_gauss.density(grid)
    schedule = BandwidthSchedule(beta=1 / 9, c=0.5)
    err = {}
    for n in (500, 8000):
        runs = []
        for k in range(5):
            data, _ = sample_mixture(two_gauss, n, 100 + k)
            runs.append(np.max(np.abs(kde(data, schedule.at(n), grid) - f)))
        err[n] = np.median(runs)
    assert err[8000] < 0.5 * err[500]


def test_blocked_evaluation_matches_direct():
    rng = np.random.default_rng(4)
    data = Dataset(Domain(2, 10.0), rng.normal(size=(300, 2)))
    q = rng.normal(size=(50, 2))
    direct = np.array(
        [np.mean([gaussian_kernel(x - p, 0.4) for p in data.points]) for x in q]
    )
    np.testing.assert_allclose(kde(data, 0.4, q), direct, rtol=1e-12)
