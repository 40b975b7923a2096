"""Graph normalisation, normalised Laplacian, eigensolver, k-means and spectral clustering."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.linalg import subspace_angles

from .bounds import SimilarityMatrix
from .mixture import Labeling

__all__ = [
    "MAX_SPECTRAL_N",
    "MAX_EXHAUSTIVE_N",
    "DegreeError",
    "MarkovKernel",
    "SpectralDecomposition",
    "MinCutResult",
    "row_normalize",
    "normalized_laplacian",
    "symmetric_eigensolve",
    "kmeans",
    "spectral_cluster",
    "exhaustive_min_cut",
    "normalized_cut",
    "diffusion_eigenvectors",
    "subspace_alignment",
    "canonical_labels",
    "same_partition",
]

MAX_SPECTRAL_N = 4000
MAX_EXHAUSTIVE_N = 14


class DegreeError(ArithmeticError):
    """A node has zero total affinity."""

    def __init__(self, row: int):
        super().__init__(f"row {row} has zero degree (isolated point)")
        self.row = row


@dataclass(frozen=True)
class MarkovKernel:
    p: np.ndarray
    alpha: float | None


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class MinCutResult:
    labeling: Labeling
    objective: float
    ncut_labeling: Labeling
    ncut_objective: float


def _affinity(sim) -> np.ndarray:
    if isinstance(sim, SimilarityMatrix):
        return sim.symmetrized()
    w = np.asarray(sim, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("affinity must be a square matrix")
    return w


def _degrees(w: np.ndarray) -> np.ndarray:
    deg = w.sum(axis=1)
    bad = np.flatnonzero(~(deg > 0))
    if bad.size:
        raise DegreeError(int(bad[0]))
    return deg


def row_normalize(sim) -> MarkovKernel:
    """Row-stochastic ``p = W / d`` with ``d`` the row sums (self-affinity included)."""
    w = _affinity(sim)
    deg = _degrees(w)
    p = w / deg[:, None]
    alpha = sim.alpha if isinstance(sim, SimilarityMatrix) else None
    return MarkovKernel(p, alpha)


def normalized_laplacian(sim) -> np.ndarray:
    """``I - D^-1/2 W D^-1/2``."""
    w = _affinity(sim)
    if w.shape[0] > MAX_SPECTRAL_N:
        raise ValueError(f"spectral operations are limited to n <= {MAX_SPECTRAL_N}")
    s = 1.0 / np.sqrt(_degrees(w))
    lap = -(s[:, None] * w * s[None, :])
    lap[np.diag_indices_from(lap)] += 1.0
    return 0.5 * (lap + lap.T)


def symmetric_eigensolve(m, k: int | None = None) -> SpectralDecomposition:
    """The ``k`` smallest eigenpairs of a symmetric matrix.

    LAPACK's tridiagonalisation path, with each eigenvector's sign fixed so its
    largest-magnitude entry is positive.
    """
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    n = a.shape[0]
    k = n if k is None else k
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in 1..{n}")
    scale = max(1.0, float(np.max(np.abs(a)))) if n else 1.0
    if np.max(np.abs(a - a.T)) > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    vals, vecs = np.linalg.eigh(0.5 * (a + a.T))
    vals, vecs = vals[:k], vecs[:, :k]
    pivot = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivot, np.arange(k)])
    signs[signs == 0] = 1.0
    return SpectralDecomposition(vals, vecs * signs)


def _sq_to_centers(x, centers):
    return np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)


def _kmeans_pp(x, k, rng):
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            break
        idx = int(rng.choice(n, p=d2 / total))
        centers.append(x[idx])
        d2 = np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1))
    return np.array(centers)


def _lloyd(x, centers, max_iter, tol):
    inertia_trace = []
    prev = np.inf
    for _ in range(max_iter):
        d2 = _sq_to_centers(x, centers)
        labels = np.argmin(d2, axis=1)
        inertia = float(d2[np.arange(x.shape[0]), labels].sum())
        inertia_trace.append(inertia)
        new = centers.copy()
        for j in range(centers.shape[0]):
            members = labels == j
            if members.any():
                new[j] = x[members].mean(axis=0)
            else:
                # refill an empty cluster with the worst-served point
                far = int(np.argmax(d2[np.arange(x.shape[0]), labels]))
                new[j] = x[far]
        centers = new
        if np.isfinite(prev) and abs(prev - inertia) <= tol * max(prev, 1e-300):
            break
        prev = inertia
    d2 = _sq_to_centers(x, centers)
    labels = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(x.shape[0]), labels].sum())
    inertia_trace.append(inertia)
    return labels, centers, inertia, inertia_trace


def kmeans(
    points,
    k: int,
    seed: int,
    n_init: int = 10,
    max_iter: int = 300,
    tol: float = 1e-9,
    return_trace: bool = False,
):
    """k-means++ seeding, Lloyd iterations, best of ``n_init`` restarts.

    Returns 1-based labels and the centres (and the inertia trace of the
    winning restart when ``return_trace`` is set).
    """
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if k < 1 or k > x.shape[0]:
        raise ValueError(f"k must lie in 1..{x.shape[0]}")
    distinct = np.unique(x, axis=0).shape[0]
    if k > distinct:
        raise ValueError(f"k = {k} exceeds the number of distinct points ({distinct})")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        centers = _kmeans_pp(x, k, rng)
        labels, centers, inertia, trace = _lloyd(x, centers, max_iter, tol)
        if best is None or inertia < best[2]:
            best = (labels, centers, inertia, trace)
    labels, centers, _, trace = best
    if return_trace:
        return labels + 1, centers, trace
    return labels + 1, centers


def canonical_labels(labels) -> np.ndarray:
    """Rename classes in order of first appearance (1, 2, ...)."""
    lab = np.asarray(labels)
    mapping = {}
    out = np.empty(lab.shape[0], dtype=np.int64)
    for i, v in enumerate(lab.tolist()):
        out[i] = mapping.setdefault(v, len(mapping) + 1)
    return out


def same_partition(a, b) -> bool:
    """True when two labelings induce the same partition."""
    return bool(np.array_equal(canonical_labels(a), canonical_labels(b)))


def spectral_cluster(sim, q: int, seed: int) -> Labeling:
    """Embed by the ``q`` lowest normalised-Laplacian eigenvectors, unit-normalise
    rows, then k-means."""
    if q < 2:
        raise ValueError("spectral clustering needs q >= 2")
    lap = normalized_laplacian(sim)
    n = lap.shape[0]
    if q > n:
        raise ValueError(f"cannot split {n} points into {q} clusters")
    emb = symmetric_eigensolve(lap, q).eigenvectors
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    emb = emb / np.where(norms > 0, norms, 1.0)
    labels, _ = kmeans(emb, q, seed)
    return Labeling(canonical_labels(labels), q)


def normalized_cut(w: np.ndarray, side: np.ndarray) -> float:
    """``cut/vol(A) + cut/vol(B)`` for a boolean side vector; degrees include the diagonal."""
    side = np.asarray(side, dtype=bool)
    deg = w.sum(axis=1)
    cut = float(w[np.ix_(side, ~side)].sum())
    va, vb = float(deg[side].sum()), float(deg[~side].sum())
    if va <= 0 or vb <= 0:
        return np.inf
    return cut / va + cut / vb


def exhaustive_min_cut(sim, q: int = 2, min_size: int = 1) -> MinCutResult:
    """Enumerate every 2-partition with both parts of size ``>= min_size``.

    Point 0 is pinned to part 1 so each partition is visited once; ties keep
    the first partition in enumeration order.
    """
    if q != 2:
        raise ValueError("the exhaustive oracle only handles q = 2")
    w = _affinity(sim).copy()
    n = w.shape[0]
    if n > MAX_EXHAUSTIVE_N:
        raise ValueError(f"exhaustive enumeration is limited to n <= {MAX_EXHAUSTIVE_N}")
    if n < 2 or 2 * min_size > n:
        raise ValueError("no 2-partition satisfies min_size")
    deg = w.sum(axis=1)
    off = w.copy()
    np.fill_diagonal(off, 0.0)
    # rows: every assignment of points 1..n-1 to side B (True)
    sides = np.array(list(product([False, True], repeat=n - 1)), dtype=bool)
    sides = np.hstack([np.zeros((sides.shape[0], 1), dtype=bool), sides])
    size_b = sides.sum(axis=1)
    ok = (size_b >= min_size) & (n - size_b >= min_size)
    sides = sides[ok]
    sb = sides.astype(float)
    cuts = np.einsum("pi,ij,pj->p", 1.0 - sb, off, sb)
    vol_b = sb @ deg
    vol_a = deg.sum() - vol_b
    with np.errstate(divide="ignore", invalid="ignore"):
        ncuts = np.where((vol_a > 0) & (vol_b > 0), cuts / vol_a + cuts / vol_b, np.inf)
    i_cut = int(np.argmin(cuts))
    i_ncut = int(np.argmin(ncuts))
    return MinCutResult(
        Labeling(sides[i_cut].astype(np.int64) + 1, 2),
        float(cuts[i_cut]),
        Labeling(sides[i_ncut].astype(np.int64) + 1, 2),
        float(ncuts[i_ncut]),
    )


def diffusion_eigenvectors(sim, k: int) -> SpectralDecomposition:
    """Leading nontrivial right eigenvectors of the row-normalised kernel.

    Returns eigenvalues of ``p`` in descending order (trivial one dropped) and
    ``psi = D^-1/2 u`` from the symmetric conjugate.
    """
    w = _affinity(sim)
    lap = normalized_laplacian(w)
    dec = symmetric_eigensolve(lap, k + 1)
    s = 1.0 / np.sqrt(_degrees(w))
    psi = dec.eigenvectors[:, 1:] * s[:, None]
    psi = psi / np.linalg.norm(psi, axis=0)
    return SpectralDecomposition(1.0 - dec.eigenvalues[1:], psi)


def subspace_alignment(a, b) -> float:
    """Cosine of the largest principal angle between two column spans."""
    ang = subspace_angles(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    return float(np.cos(np.max(ang)))
