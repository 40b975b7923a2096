"""Pairwise similarity kernels induced by the error bounds, and their cuts.

Sum conventions
---------------
``unordered`` sums run over pairs ``l < m``; ``ordered`` over ``l != m``.
The H bound carries prefactor ``1/n^2``, the G/V bounds ``2/n^2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import MAX_EXACT_N, _row_blocks, _sqdist, kde, kernel_matrix
from .mixture import Dataset, Labeling

__all__ = [
    "DENSITY_FLOOR",
    "SimilarityMatrix",
    "floored_kde",
    "nn_similarity",
    "plugin_similarity",
    "gauss_similarity",
    "pairwise_bound",
    "cut_objective",
    "bound_prefactor",
    "weighted_cross_sum",
    "nn_bound_sum",
    "plugin_bound_sum",
]

DENSITY_FLOOR = 1e-12
CONVENTIONS = ("unordered", "ordered")


@dataclass(frozen=True)
class SimilarityMatrix:
    """Dense ``n x n`` similarity with its construction metadata.

    The diagonal holds the self-affinity given by the same formula at
    ``l = m``; bounds and cuts never read it.
    """

    kind: str
    values: np.ndarray
    h: float
    a: float = 0.0
    b: float = 0.0
    floor: float = 0.0
    clamped: int = 0

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def symmetric(self) -> bool:
        return self.kind == "H" or self.a == self.b

    @property
    def alpha(self) -> float | None:
        """Anisotropic normalisation exponent when the kernel is ``K / (f^a f^a)``."""
        if self.kind == "H" or self.a != self.b:
            return None
        return self.a

    def symmetrized(self) -> np.ndarray:
        if self.symmetric:
            return self.values
        return 0.5 * (self.values + self.values.T)

    def scaled(self, factor: float) -> "SimilarityMatrix":
        return SimilarityMatrix(
            self.kind, self.values * factor, self.h, self.a, self.b, self.floor, self.clamped
        )


def floored_kde(dataset: Dataset, h: float) -> tuple[np.ndarray, float, int]:
    """KDE at the sample points with values below ``1e-12 * max`` clamped.

    Returns the clamped values, the floor, and how many points were clamped.
    """
    fhat = kde(dataset, h, dataset.points)
    floor = DENSITY_FLOOR * float(fhat.max())
    low = fhat < floor
    return np.where(low, floor, fhat), floor, int(low.sum())


def _check_n(dataset: Dataset) -> None:
    if dataset.n > MAX_EXACT_N:
        raise ValueError(f"dense similarity matrices are limited to n <= {MAX_EXACT_N}")


def nn_similarity(dataset: Dataset, h: float) -> SimilarityMatrix:
    """``H_lm = K_h(X_l - X_m) (1/fhat(X_l) + 1/fhat(X_m))``."""
    _check_n(dataset)
    fhat, floor, clamped = floored_kde(dataset, h)
    k = kernel_matrix(dataset.points, dataset.points, h)
    inv = 1.0 / fhat
    return SimilarityMatrix("H", k * (inv[:, None] + inv[None, :]), h, floor=floor, clamped=clamped)


def plugin_similarity(dataset: Dataset, h: float, a: float = 0.5, b: float = 0.5) -> SimilarityMatrix:
    """``K_h(X_l - X_m) / (fhat(X_l)^a fhat(X_m)^b)``.

    ``a = b = 1/2`` is the plug-in error kernel G, ``a = b = 1`` the
    misclassified-volume kernel V, ``a = alpha, b = 1 - alpha`` the
    asymmetric variant, and ``a = b = 0`` the plain Gaussian affinity.
    """
    if a < 0 or b < 0:
        raise ValueError("density exponents must be nonnegative")
    _check_n(dataset)
    fhat, floor, clamped = floored_kde(dataset, h)
    k = kernel_matrix(dataset.points, dataset.points, h)
    vals = k / (fhat[:, None] ** a * fhat[None, :] ** b)
    if a == b == 1:
        kind = "V"
    elif a == b == 0:
        kind = "gauss"
    else:
        kind = "G"
    return SimilarityMatrix(kind, vals, h, float(a), float(b), floor, clamped)


def gauss_similarity(dataset: Dataset, h: float) -> SimilarityMatrix:
    return plugin_similarity(dataset, h, 0.0, 0.0)


def bound_prefactor(kind: str) -> float:
    return 1.0 if kind == "H" else 2.0


def _check_convention(convention: str) -> None:
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")


def cut_objective(sim: SimilarityMatrix, labeling: Labeling) -> float:
    """Unnormalised cut ``sum_{l<m} theta_lm W_lm``."""
    if labeling.n != sim.n:
        raise ValueError("labeling length does not match the similarity matrix")
    w = sim.symmetrized()
    theta = labeling.theta()
    return float(np.sum(np.triu(theta * w, k=1)))


def pairwise_bound(sim: SimilarityMatrix, labeling: Labeling, convention: str = "unordered") -> float:
    """Error bound from a similarity matrix.

    H: ``(1/n^2) sum theta_lm H_lm``; G/V: ``(2/n^2) sum theta_lm G_lm``,
    with the sum over ``l < m`` (unordered) or ``l != m`` (ordered).
    """
    _check_convention(convention)
    cut = cut_objective(sim, labeling)
    pairs = 1.0 if convention == "unordered" else 2.0
    return bound_prefactor(sim.kind) * pairs * cut / sim.n**2


def weighted_cross_sum(
    dataset: Dataset, labeling: Labeling, h: float, row_weights, col_weights
) -> float:
    """``sum_{l != m} theta_lm r_l K_h(X_l - X_m) c_m`` without forming the matrix.

    Blocked over rows; each row is reduced over all columns at once.
    """
    labeling.check(dataset)
    pts = dataset.points
    n, d = pts.shape
    r = np.asarray(row_weights, dtype=float)
    c = np.asarray(col_weights, dtype=float)
    lab = labeling.labels
    norm = (2.0 * np.pi) ** (d / 2) * h**d
    per_row = np.empty(n)
    for rows in _row_blocks(n, n, d):
        k = np.exp(-0.5 * _sqdist(pts[rows], pts) / (h * h))
        k *= lab[rows, None] != lab[None, :]
        per_row[rows] = k @ c
    return float(np.dot(r, per_row) / norm)


def nn_bound_sum(dataset: Dataset, labeling: Labeling, h: float, convention: str = "unordered") -> float:
    """H bound computed blockwise, equal to ``pairwise_bound(nn_similarity(...))``."""
    _check_convention(convention)
    fhat, _, _ = floored_kde(dataset, h)
    # sum_{l<m} theta K (1/f_l + 1/f_m) = sum_{l != m} theta K / f_l
    total = weighted_cross_sum(dataset, labeling, h, 1.0 / fhat, np.ones(dataset.n))
    pairs = 1.0 if convention == "unordered" else 2.0
    return pairs * total / dataset.n**2


def plugin_bound_sum(
    dataset: Dataset,
    labeling: Labeling,
    h: float,
    a: float = 0.5,
    b: float = 0.5,
    convention: str = "unordered",
    fhat: np.ndarray | None = None,
) -> float:
    """Cut ``sum theta_lm K_h / (f_l^a f_m^b)`` over unordered or ordered pairs.

    This is the raw cut, not multiplied by ``2/n^2``.
    """
    _check_convention(convention)
    if fhat is None:
        fhat, _, _ = floored_kde(dataset, h)
    ordered = weighted_cross_sum(dataset, labeling, h, fhat**-a, fhat**-b)
    return ordered if convention == "ordered" else 0.5 * ordered
