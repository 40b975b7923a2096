import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ortho_group

from boundcut.bounds import SimilarityMatrix, cut_objective, plugin_similarity
from boundcut.density import BandwidthSchedule
from boundcut.evaluation import circle_alignment, sample_circle
from boundcut.mixture import Dataset, Domain, Labeling
from boundcut.spectral import (
    MAX_EXHAUSTIVE_N,
    DegreeError,
    canonical_labels,
    diffusion_eigenvectors,
    exhaustive_min_cut,
    kmeans,
    normalized_cut,
    normalized_laplacian,
    row_normalize,
    same_partition,
    spectral_cluster,
    subspace_alignment,
    symmetric_eigensolve,
)


def _blobs(rng, per, centers, sigma, d=2):
    pts = np.vstack([c + sigma * rng.normal(size=(per, d)) for c in centers])
    truth = np.repeat(np.arange(1, len(centers) + 1), per)
    return Dataset(Domain.enclosing(pts), pts), truth


def test_row_normalize_rows_sum_to_one():
    w = np.array([[1.0, 1.0], [1.0, 1.0]])
    p = row_normalize(w).p
    np.testing.assert_allclose(p, [[0.5, 0.5], [0.5, 0.5]])
    rng = np.random.default_rng(0)
    data = Dataset(Domain(2, 10.0), rng.normal(size=(40, 2)))
    sim = plugin_similarity(data, 0.5, 1.0, 1.0)
    mk = row_normalize(sim)
    assert np.max(np.abs(mk.p.sum(axis=1) - 1)) < 1e-12 and np.all(mk.p >= 0)
    assert mk.alpha == 1.0
    np.testing.assert_allclose(row_normalize(sim.scaled(7.5)).p, mk.p, rtol=1e-13)
    assert row_normalize(plugin_similarity(data, 0.5)).alpha == 0.5


def test_zero_degree_is_rejected_with_row():
    w = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
    with pytest.raises(DegreeError) as info:
        row_normalize(w)
    assert info.value.row == 2
    with pytest.raises(DegreeError):
        normalized_laplacian(w)


def test_laplacian_small_graphs():
    vals = symmetric_eigensolve(normalized_laplacian(np.array([[0.0, 1.0], [1.0, 0.0]]))).eigenvalues
    np.testing.assert_allclose(vals, [0.0, 2.0], atol=1e-14)
    block = np.zeros((4, 4))
    block[:2, :2] = block[2:, 2:] = 1.0
    vals = symmetric_eigensolve(normalized_laplacian(block)).eigenvalues
    np.testing.assert_allclose(vals[:2], [0.0, 0.0], atol=1e-14)
    assert vals[2] > 0.5


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_laplacian_null_vector_and_spectrum(seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.01, 1.0, (12, 12))
    w = a + a.T
    lap = normalized_laplacian(w)
    dec = symmetric_eigensolve(lap)
    assert abs(dec.eigenvalues[0]) < 1e-12
    assert dec.eigenvalues.min() > -1e-10 and dec.eigenvalues.max() < 2 + 1e-10
    v = np.sqrt(w.sum(axis=1))
    v /= np.linalg.norm(v)
    assert abs(abs(dec.eigenvectors[:, 0] @ v) - 1) < 1e-10


def test_eigensolve_examples():
    np.testing.assert_allclose(symmetric_eigensolve(np.eye(3)).eigenvalues, [1, 1, 1])
    np.testing.assert_allclose(symmetric_eigensolve([[2.0, 1.0], [1.0, 2.0]]).eigenvalues, [1, 3], atol=1e-14)
    with pytest.raises(ValueError):
        symmetric_eigensolve([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        symmetric_eigensolve(np.eye(3), 4)


def test_eigensolve_residuals_and_orthonormality():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(50, 50))
    m = a + a.T
    dec = symmetric_eigensolve(m, 50)
    norm = np.linalg.norm(m, 2)
    for lam, v in zip(dec.eigenvalues, dec.eigenvectors.T):
        assert np.linalg.norm(m @ v - lam * v) <= 1e-8 * norm
    np.testing.assert_allclose(dec.eigenvectors.T @ dec.eigenvectors, np.eye(50), atol=1e-12)
    assert np.all(np.diff(dec.eigenvalues) >= 0)


def test_eigensolve_is_deterministic_with_fixed_signs():
    m = ortho_group.rvs(6, random_state=3) @ np.diag(np.arange(6.0)) @ ortho_group.rvs(6, random_state=3).T
    a, b = symmetric_eigensolve(m, 3), symmetric_eigensolve(m.copy(), 3)
    assert a.eigenvectors.tobytes() == b.eigenvectors.tobytes()
    piv = np.argmax(np.abs(a.eigenvectors), axis=0)
    assert np.all(a.eigenvectors[piv, range(3)] > 0)


def test_kmeans_examples():
    labels, centers = kmeans(np.array([0.0, 1.0, 10.0, 11.0]), 2, seed=0)
    assert same_partition(labels, [1, 1, 2, 2])
    np.testing.assert_allclose(np.sort(centers[:, 0]), [0.5, 10.5])
    pts = np.random.default_rng(0).normal(size=(30, 3))
    labels, centers = kmeans(pts, 1, seed=4)
    assert np.all(labels == 1)
    np.testing.assert_allclose(centers[0], pts.mean(axis=0), rtol=1e-13)
    with pytest.raises(ValueError):
        kmeans(np.array([[1.0], [1.0], [1.0]]), 2, seed=0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 6))
def test_lloyd_inertia_never_increases(seed, k):
    pts = np.random.default_rng(seed).normal(size=(60, 2))
    _, _, trace = kmeans(pts, k, seed, n_init=1, return_trace=True)
    assert np.all(np.diff(trace) <= 1e-12 * max(trace))


def test_kmeans_deterministic_per_seed():
    pts = np.random.default_rng(2).normal(size=(80, 2))
    a, ca = kmeans(pts, 3, 17)
    b, cb = kmeans(pts, 3, 17)
    assert a.tobytes() == b.tobytes() and ca.tobytes() == cb.tobytes()


def test_spectral_recovers_two_blobs():
    rng = np.random.default_rng(10)
    data, truth = _blobs(rng, 50, [np.array([-5.0, 0.0]), np.array([5.0, 0.0])], 0.3)
    h = BandwidthSchedule.default(d=2).resolve(data).at(data.n)
    lab = spectral_cluster(plugin_similarity(data, h), 2, seed=0)
    assert same_partition(lab.labels, truth)
    # the exhaustive oracle agrees on a 12-point subsample
    idx = np.r_[0:6, 50:56]
    sub = Dataset(data.domain, data.points[idx])
    res = exhaustive_min_cut(plugin_similarity(sub, h), 2)
    assert same_partition(res.labeling.labels, truth[idx])
    assert same_partition(res.ncut_labeling.labels, truth[idx])


def test_spectral_single_blob_splits_into_nonempty_parts():
    pts = np.random.default_rng(3).normal(size=(60, 2))
    data = Dataset(Domain.enclosing(pts), pts)
    lab = spectral_cluster(plugin_similarity(data, 0.5), 2, seed=1)
    assert set(lab.labels.tolist()) == {1, 2}


def test_partition_comparison_ignores_names():
    assert same_partition([2, 2, 1, 3], [1, 1, 3, 2])
    assert not same_partition([1, 1, 2], [1, 2, 2])
    np.testing.assert_array_equal(canonical_labels([5, 3, 5, 9]), [1, 2, 1, 3])


def test_exhaustive_two_triangles():
    pts = np.array([[-1.0, 0.0], [-1.2, 0.3], [-0.8, 0.3], [1.0, 0.0], [1.2, 0.3], [0.8, 0.3]])
    data = Dataset(Domain(2, 3.0), pts)
    for a in (0.0, 0.5, 1.0):
        res = exhaustive_min_cut(plugin_similarity(data, 0.5, a, a), 2, min_size=1)
        assert same_partition(res.labeling.labels, [1, 1, 1, 2, 2, 2])


def test_exhaustive_two_points_and_size_cap():
    w = np.array([[1.0, 0.3], [0.3, 1.0]])
    res = exhaustive_min_cut(w, 2)
    np.testing.assert_array_equal(res.labeling.labels, [1, 2])
    assert res.objective == pytest.approx(0.3)
    with pytest.raises(ValueError):
        exhaustive_min_cut(np.ones((MAX_EXHAUSTIVE_N + 1,) * 2), 2)


def test_exhaustive_matches_brute_force():
    rng = np.random.default_rng(6)
    a = rng.uniform(size=(7, 7))
    w = a + a.T
    best_cut, best_ncut = np.inf, np.inf
    for mask in range(1, 2**7 - 1):
        side = np.array([(mask >> i) & 1 for i in range(7)], dtype=bool)
        if side[0]:
            continue
        lab = Labeling(side.astype(int) + 1, 2)
        best_cut = min(best_cut, cut_objective(SimilarityMatrix("gauss", w, 1.0), lab))
        best_ncut = min(best_ncut, normalized_cut(w, side))
    res = exhaustive_min_cut(w, 2)
    assert res.objective == pytest.approx(best_cut, rel=1e-12)
    assert res.ncut_objective == pytest.approx(best_ncut, rel=1e-12)


def test_exhaustive_keeps_duplicates_together():
    rng = np.random.default_rng(11)
    base = rng.normal(size=(5, 2)) * 2
    pts = np.vstack([base, base[:3]])  # points 5,6,7 duplicate 0,1,2
    data = Dataset(Domain.enclosing(pts), pts)
    res = exhaustive_min_cut(plugin_similarity(data, 0.8), 2, min_size=2)
    lab = res.labeling.labels
    for i in range(3):
        assert lab[i] == lab[5 + i]


def test_uniform_circle_normalisations_agree():
    pts, theta = sample_circle(1000, 0.0, 5)
    data = Dataset(Domain(2, 1.5), pts)
    h = BandwidthSchedule.default(d=2).resolve(data).at(data.n)
    half = diffusion_eigenvectors(plugin_similarity(data, h, 0.5, 0.5), 2).eigenvectors
    one = diffusion_eigenvectors(plugin_similarity(data, h, 1.0, 1.0), 2).eigenvectors
    assert subspace_alignment(half, one) >= 0.99


def test_circle_alignment_prefers_density_free_normalisation():
    res = circle_alignment(2000, 0.8, 0)
    al = res["alignment"]
    assert al[1.0] >= 0.95
    assert al[0.0] < al[1.0]
