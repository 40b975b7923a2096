"""Gaussian kernels, kernel density estimators and bandwidth schedules.

Every kernel carries the ``h**-d`` factor, so ``K_h`` integrates to one and
``K_h * K_h = K_{sqrt(2) h}``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .mixture import Dataset, Labeling

__all__ = [
    "MAX_EXACT_N",
    "BandwidthSchedule",
    "EmptyClassError",
    "bandwidth_at",
    "gaussian_kernel",
    "kernel_matrix",
    "kde",
    "kde_at",
    "class_kde_at",
    "generalized_kde",
    "generalized_kde_at",
]

MAX_EXACT_N = 20_000
# rows per block so that a (block, n, d) difference tensor stays small
_BLOCK_ELEMS = 2_000_000


class EmptyClassError(ValueError):
    """A class has no points under the labeling."""


def gaussian_kernel(u, h: float):
    """Isotropic Gaussian ``h^-d (2 pi)^-d/2 exp(-|u/h|^2 / 2)``.

    The last axis of ``u`` is the coordinate axis; a scalar is a 1-d
    displacement.
    """
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        u = u.reshape(1)
    d = u.shape[-1]
    z = u / h
    val = np.exp(-0.5 * np.sum(z * z, axis=-1)) / ((2.0 * np.pi) ** (d / 2) * h**d)
    return float(val) if np.ndim(val) == 0 else val


def _sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _row_blocks(m: int, n: int, d: int):
    step = max(1, _BLOCK_ELEMS // max(1, n * d))
    for start in range(0, m, step):
        yield slice(start, min(m, start + step))


def kernel_matrix(a, b, h: float) -> np.ndarray:
    """Dense ``K_h(a_i - b_j)`` for two point sets of shape ``(m, d)``, ``(n, d)``."""
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    d = a.shape[1]
    norm = (2.0 * np.pi) ** (d / 2) * h**d
    out = np.empty((a.shape[0], b.shape[0]))
    for rows in _row_blocks(a.shape[0], b.shape[0], d):
        out[rows] = np.exp(-0.5 * _sqdist(a[rows], b) / (h * h)) / norm
    return out


def _weighted_kernel_sums(points, weights, h, queries) -> np.ndarray:
    """``sum_l w_l K_h(x - X_l)`` per query, blocked over queries only.

    Each query row is reduced over the full training set in one call, so the
    result does not depend on the block partition.
    """
    n, d = points.shape
    if n > MAX_EXACT_N:
        raise ValueError(
            f"exact kernel sums are limited to n <= {MAX_EXACT_N}; got n = {n}"
        )
    norm = (2.0 * np.pi) ** (d / 2) * h**d
    out = np.empty(queries.shape[0])
    for rows in _row_blocks(queries.shape[0], n, d):
        k = np.exp(-0.5 * _sqdist(queries[rows], points) / (h * h))
        out[rows] = (k * weights).sum(axis=1) if weights is not None else k.sum(axis=1)
    return out / norm


def _queries(x, d: int) -> np.ndarray:
    q = np.asarray(x, dtype=float)
    if q.ndim == 0:
        q = q.reshape(1, 1)
    elif q.ndim == 1:
        q = q.reshape(-1, d) if d > 1 else q[:, None]
    if q.shape[1] != d:
        raise ValueError(f"queries must have dimension {d}")
    return q


def kde(dataset: Dataset, h: float, queries) -> np.ndarray:
    """Vectorised KDE ``(1/n) sum_l K_h(x - X_l)`` at many queries."""
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    x = _queries(queries, dataset.d)
    return _weighted_kernel_sums(dataset.points, None, h, x) / dataset.n


def kde_at(dataset: Dataset, h: float, x) -> float:
    return float(kde(dataset, h, np.reshape(x, (1, dataset.d)))[0])


def class_kde(dataset: Dataset, labeling: Labeling, i: int, h: float, queries) -> np.ndarray:
    labeling.check(dataset)
    mask = labeling.labels == i
    n_i = int(mask.sum())
    if n_i == 0:
        raise EmptyClassError(f"class {i} is empty under this labeling (degenerate partition)")
    x = _queries(queries, dataset.d)
    # 1 / (n * pi_hat) with pi_hat = n_i / n reduces to 1 / n_i
    return _weighted_kernel_sums(dataset.points, mask.astype(float), h, x) / n_i


def class_kde_at(dataset: Dataset, labeling: Labeling, i: int, h: float, x) -> float:
    """Class-conditional KDE with the empirical prior ``n_i / n``."""
    return float(class_kde(dataset, labeling, i, h, np.reshape(x, (1, dataset.d)))[0])


def generalized_kde(dataset: Dataset, gvals, h: float, queries) -> np.ndarray:
    """Estimate of ``f / g``: ``(1/n) sum_l K_h(x - X_l) / g(X_l)``."""
    g = np.asarray(gvals, dtype=float).reshape(-1)
    if g.shape[0] != dataset.n:
        raise ValueError("need one weight per point")
    if np.any(~(g > 0)):
        raise ValueError("generalized KDE weights must be strictly positive")
    x = _queries(queries, dataset.d)
    return _weighted_kernel_sums(dataset.points, 1.0 / g, h, x) / dataset.n


def generalized_kde_at(dataset: Dataset, gvals, h: float, x) -> float:
    return float(generalized_kde(dataset, gvals, h, np.reshape(x, (1, dataset.d)))[0])


@dataclass(frozen=True)
class BandwidthSchedule:
    """``h_n = c * n**-beta``.

    ``c=None`` stands for ``"auto"``: resolve it from data with
    :meth:`resolve` (mean per-axis sample standard deviation).
    """

    beta: float
    c: float | None = None
    gamma: float = 1.0
    d: int = 1

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ValueError("; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        if not self.beta > 0:
            out.append(f"beta = {self.beta} must be positive so that h_n decreases to 0")
        if self.c is not None and not self.c > 0:
            out.append(f"scale c = {self.c} must be positive")
        if not self.gamma > 0:
            out.append(f"smoothness gamma = {self.gamma} must be positive")
        if int(self.d) != self.d or self.d < 1:
            out.append(f"dimension d = {self.d} must be a positive integer")
            return out
        rate = 1.0 / (self.d + 2.0 * self.gamma)
        if self.beta >= rate:
            out.append(
                f"beta = {self.beta:.6g} violates the consistency condition "
                f"-log(h_n) / (n h_n^(d+2*gamma)) -> 0, which needs beta < 1/(d+2*gamma) = {rate:.6g}"
            )
        cut = 1.0 / (4 * self.d + 4)
        if self.beta >= cut:
            out.append(
                f"beta = {self.beta:.6g} violates the boundary-cut lower bound "
                f"h_n > n^(-1/(4d+4)), which needs beta < 1/(4d+4) = {cut:.6g}"
            )
        return out

    @classmethod
    def default(cls, d: int = 1, gamma: float = 1.0, c: float | None = None) -> "BandwidthSchedule":
        return cls(beta=1.0 / (4 * d + 5), c=c, gamma=gamma, d=d)

    def resolve(self, dataset: Dataset) -> "BandwidthSchedule":
        if self.c is not None:
            return self
        if dataset.n < 2:
            raise ValueError("automatic scale needs at least two points")
        c = float(np.mean(np.std(dataset.points, axis=0, ddof=1)))
        if not c > 0:
            raise ValueError("automatic scale is zero: all points coincide")
        return replace(self, c=c)

    def at(self, n: int) -> float:
        return bandwidth_at(self, n)


def bandwidth_at(schedule: BandwidthSchedule, n: int) -> float:
    if n < 1:
        raise ValueError("n must be at least 1")
    if schedule.c is None:
        raise ValueError("schedule scale is 'auto'; call resolve(dataset) first")
    return float(schedule.c * float(n) ** (-schedule.beta))
