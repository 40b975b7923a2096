"""Datasets, labelings, the bounding box, and truncated Gaussian mixture oracles."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp, ndtr

__all__ = [
    "Domain",
    "Dataset",
    "Labeling",
    "GaussianComponent",
    "MixtureModel",
    "SamplingError",
    "sample_mixture",
    "mixture_density",
]


class SamplingError(RuntimeError):
    """Raised when rejection sampling cannot fill a class inside the domain."""


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Domain:
    """The box ``[-m0, m0]^d`` that contains every sample."""

    d: int
    m0: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d}")
        if not np.isfinite(self.m0) or self.m0 <= 0:
            raise ValueError(f"half-width m0 must be positive, got {self.m0}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "m0", float(self.m0))

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.d)
        return np.all(np.abs(pts) <= self.m0, axis=1)

    @property
    def volume(self) -> float:
        return (2.0 * self.m0) ** self.d

    @classmethod
    def enclosing(cls, points, margin: float = 1.0) -> "Domain":
        """Smallest centred box holding ``points``, widened by ``margin``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        m0 = float(np.max(np.abs(pts))) if pts.size else 0.0
        return cls(pts.shape[1], m0 + margin)


@dataclass(frozen=True)
class Dataset:
    """Immutable sample ``X_1..X_n`` inside a domain."""

    domain: Domain
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, self.domain.d)
        if pts.ndim != 2 or pts.shape[1] != self.domain.d:
            raise ValueError(
                f"points must have shape (n, {self.domain.d}), got {pts.shape}"
            )
        if pts.shape[0] < 1:
            raise ValueError("a dataset needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        outside = ~self.domain.contains(pts)
        if outside.any():
            idx = int(np.flatnonzero(outside)[0])
            raise ValueError(f"point {idx} lies outside [-{self.domain.m0}, {self.domain.m0}]^d")
        object.__setattr__(self, "points", _frozen(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.domain.d

    @classmethod
    def from_points(cls, points, domain: Domain | None = None) -> "Dataset":
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if domain is None:
            domain = Domain.enclosing(pts)
        return cls(domain, pts)


@dataclass(frozen=True)
class Labeling:
    """Hypothetical labels ``Y_l`` in ``{1..q}``."""

    labels: np.ndarray
    q: int

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if lab.size and not np.all(np.equal(np.mod(lab, 1), 0)):
            raise ValueError("labels must be integers")
        lab = lab.astype(np.int64)
        if int(self.q) != self.q or self.q < 1:
            raise ValueError(f"class count must be a positive integer, got {self.q}")
        if lab.size and (lab.min() < 1 or lab.max() > self.q):
            raise ValueError(f"labels must lie in 1..{self.q}")
        object.__setattr__(self, "q", int(self.q))
        object.__setattr__(self, "labels", _frozen(lab, np.int64))

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    @property
    def index(self) -> np.ndarray:
        """Zero-based class indices."""
        return self.labels - 1

    def counts(self) -> np.ndarray:
        return np.bincount(self.index, minlength=self.q)

    def theta(self) -> np.ndarray:
        """Indicator matrix ``theta_lm = 1{Y_l != Y_m}``."""
        return (self.labels[:, None] != self.labels[None, :]).astype(float)

    def check(self, dataset: Dataset) -> None:
        if self.n != dataset.n:
            raise ValueError(f"labeling has {self.n} labels but the dataset has {dataset.n} points")

    @classmethod
    def from_sequence(cls, labels: Sequence[int], q: int | None = None) -> "Labeling":
        lab = np.asarray(labels, dtype=np.int64)
        if q is None:
            q = int(lab.max()) if lab.size else 1
        return cls(lab, q)


@dataclass(frozen=True)
class GaussianComponent:
    """Diagonal Gaussian ``N(mean, diag(scale**2))``."""

    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        scale = np.asarray(self.scale, dtype=float)
        if scale.ndim == 0:
            scale = np.full(mean.shape, float(scale))
        if mean.ndim != 1 or scale.shape != mean.shape:
            raise ValueError("mean and scale must be vectors of equal length")
        if np.any(scale <= 0):
            raise ValueError("scales must be positive")
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "scale", _frozen(scale))

    @property
    def d(self) -> int:
        return self.mean.shape[0]

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        z = (x - self.mean) / self.scale
        return (
            -0.5 * np.sum(z * z, axis=-1)
            - np.sum(np.log(self.scale))
            - 0.5 * self.d * np.log(2.0 * np.pi)
        )

    def box_mass(self, m0: float) -> float:
        """Probability mass inside ``[-m0, m0]^d``."""
        mass = 1.0
        for mu, s in zip(self.mean, self.scale):
            lo, hi = (-m0 - mu) / s, (m0 - mu) / s
            # each branch maps onto itself (or its mirror) under reflection,
            # and the one-sided forms keep precision far out in a tail
            if hi <= 0:
                mass *= ndtr(hi) - ndtr(lo)
            elif lo >= 0:
                mass *= ndtr(-lo) - ndtr(-hi)
            else:
                mass *= 1.0 - (ndtr(lo) + ndtr(-hi))
        return float(mass)


@dataclass(frozen=True)
class MixtureModel:
    """Ground-truth class-conditional model truncated to a box.

    Each class density is a finite Gaussian mixture renormalised over the
    domain; the marginal is ``f = sum_i pi_i f_i``.
    """

    priors: np.ndarray
    components: tuple
    domain: Domain
    _log_mass: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        priors = np.asarray(self.priors, dtype=float)
        if priors.ndim != 1 or priors.size < 1:
            raise ValueError("priors must be a non-empty vector")
        if np.any(priors < 0) or abs(priors.sum() - 1.0) > 1e-12:
            raise ValueError("priors must be nonnegative and sum to 1")
        comps = []
        for i, cls_comps in enumerate(self.components):
            if isinstance(cls_comps, GaussianComponent):
                cls_comps = [(1.0, cls_comps)]
            cls_comps = [
                (1.0, c) if isinstance(c, GaussianComponent) else (float(c[0]), c[1])
                for c in cls_comps
            ]
            if not cls_comps:
                raise ValueError(f"class {i + 1} has no components")
            weights = np.array([w for w, _ in cls_comps])
            if np.any(weights <= 0):
                raise ValueError("component weights must be positive")
            weights = weights / weights.sum()
            for _, c in cls_comps:
                if c.d != self.domain.d:
                    raise ValueError("component dimension differs from the domain")
            comps.append(tuple((float(w), c) for w, (_, c) in zip(weights, cls_comps)))
        if len(comps) != priors.size:
            raise ValueError(f"{priors.size} priors but {len(comps)} classes")
        masses = []
        for cls_comps in comps:
            m = sum(w * c.box_mass(self.domain.m0) for w, c in cls_comps)
            if m <= 1e-300:
                raise ValueError("a class has no mass inside the domain")
            masses.append(m)
        object.__setattr__(self, "priors", _frozen(priors))
        object.__setattr__(self, "components", tuple(comps))
        object.__setattr__(self, "_log_mass", _frozen(np.log(masses)))

    @property
    def q(self) -> int:
        return self.priors.size

    @property
    def d(self) -> int:
        return self.domain.d

    @classmethod
    def gaussians(cls, means, scales, priors=None, m0: float | None = None) -> "MixtureModel":
        """One Gaussian per class.

        ``m0`` defaults to the largest ``|mean|`` plus six of the largest scale,
        which keeps every truncation correction below 1e-6.
        """
        means = [np.atleast_1d(np.asarray(m, dtype=float)) for m in means]
        scales = list(scales) if np.ndim(scales) else [scales] * len(means)
        comps = [GaussianComponent(m, s) for m, s in zip(means, scales)]
        if priors is None:
            priors = np.full(len(comps), 1.0 / len(comps))
        if m0 is None:
            m0 = default_half_width(comps)
        return cls(np.asarray(priors, dtype=float), tuple(comps), Domain(comps[0].d, m0))

    def class_log_densities(self, points) -> np.ndarray:
        """``log f_i(x)`` for every point and class, shape ``(m, q)``."""
        x = self._as_points(points)
        out = np.empty((x.shape[0], self.q))
        for i, cls_comps in enumerate(self.components):
            terms = np.stack([np.log(w) + c.logpdf(x) for w, c in cls_comps], axis=1)
            out[:, i] = logsumexp(terms, axis=1) - self._log_mass[i]
        return out

    def class_densities(self, points) -> np.ndarray:
        return np.exp(self.class_log_densities(points))

    def density(self, points) -> np.ndarray:
        with np.errstate(divide="ignore"):
            logp = np.log(self.priors)
        return np.exp(logsumexp(self.class_log_densities(points) + logp, axis=1))

    def posterior(self, points) -> np.ndarray:
        """``eta_i(x) = pi_i f_i(x) / f(x)``; rows sum to one."""
        with np.errstate(divide="ignore"):
            joint = self.class_log_densities(points) + np.log(self.priors)
        joint -= joint.max(axis=1, keepdims=True)
        w = np.exp(joint)
        return w / w.sum(axis=1, keepdims=True)

    def _as_points(self, points) -> np.ndarray:
        x = np.asarray(points, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1, 1)
        elif x.ndim == 1:
            x = x.reshape(-1, self.d) if self.d > 1 else x[:, None]
        if x.shape[-1] != self.d:
            raise ValueError(f"expected points of dimension {self.d}")
        return x


def default_half_width(components: Sequence[GaussianComponent]) -> float:
    reach = max(float(np.max(np.abs(c.mean))) for c in components)
    return reach + 6.0 * max(float(np.max(c.scale)) for c in components)


def sample_mixture(
    model: MixtureModel, n: int, seed: int, max_rounds: int = 1000
) -> tuple[Dataset, Labeling]:
    """Draw ``n`` labelled points: class by prior, then point by rejection.

    Raises
    ------
    SamplingError
        If some class still has unfilled slots after ``max_rounds`` rejection
        rounds, which means its components put negligible mass in the domain.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    classes = rng.choice(model.q, size=n, p=model.priors)
    points = np.empty((n, model.d))
    m0 = model.domain.m0
    for i, cls_comps in enumerate(model.components):
        slots = np.flatnonzero(classes == i)
        weights = np.array([w for w, _ in cls_comps])
        means = np.stack([c.mean for _, c in cls_comps])
        scales = np.stack([c.scale for _, c in cls_comps])
        filled = 0
        for _ in range(max_rounds):
            need = slots.size - filled
            if need == 0:
                break
            which = rng.choice(len(cls_comps), size=need, p=weights)
            draw = means[which] + scales[which] * rng.standard_normal((need, model.d))
            ok = draw[np.all(np.abs(draw) <= m0, axis=1)]
            points[slots[filled:filled + ok.shape[0]]] = ok
            filled += ok.shape[0]
        if filled < slots.size:
            raise SamplingError(
                f"class {i + 1}: rejection sampling exhausted {max_rounds} rounds; "
                "the component has negligible mass inside the domain"
            )
    return Dataset(model.domain, points), Labeling(classes + 1, model.q)


def mixture_density(model: MixtureModel, x) -> tuple[float, np.ndarray, np.ndarray]:
    """Marginal ``f(x)``, class densities ``f_i(x)`` and posterior at one point."""
    pt = model._as_points(x)
    if pt.shape[0] != 1:
        raise ValueError("mixture_density takes a single point")
    if not model.domain.contains(pt)[0]:
        raise ValueError(f"point {pt[0].tolist()} lies outside the domain")
    fi = model.class_densities(pt)[0]
    return float(model.density(pt)[0]), fi, model.posterior(pt)[0]
