"""Soft/hard nearest-neighbour, plug-in and Bayes classifiers.

Labels are 1-based. Ties go to the lowest point index (nearest neighbour)
or the lowest class label (argmax rules).
"""

from __future__ import annotations

import numpy as np

from .density import MAX_EXACT_N, _queries, _row_blocks, _sqdist
from .mixture import Dataset, Labeling, MixtureModel

__all__ = [
    "Classifier",
    "SoftNNClassifier",
    "NNClassifier",
    "PluginClassifier",
    "BayesClassifier",
    "ConstantClassifier",
    "soft_nn_posterior",
    "nn_classify",
    "plugin_regression",
    "plugin_classify",
    "bayes_classify",
]


def _class_weights(points, index, q, h, queries) -> np.ndarray:
    """Kernel class shares ``sum_l K_h(x-X_l) 1{Y_l=i} / sum_l K_h(x-X_l)``.

    Distances are shifted by the per-query minimum before exponentiating;
    the shift cancels in the ratio and keeps tiny bandwidths from
    underflowing to 0/0.
    """
    n, d = points.shape
    if n > MAX_EXACT_N:
        raise ValueError(f"exact kernel sums are limited to n <= {MAX_EXACT_N}; got n = {n}")
    members = [np.flatnonzero(index == i) for i in range(q)]
    out = np.empty((queries.shape[0], q))
    for rows in _row_blocks(queries.shape[0], n, d):
        d2 = _sqdist(queries[rows], points)
        d2 -= d2.min(axis=1, keepdims=True)
        k = np.exp(-0.5 * d2 / (h * h))
        # per-row reductions (not BLAS products) so the rounding does not
        # depend on how queries are batched
        w = np.column_stack([k[:, m].sum(axis=1) for m in members])
        out[rows] = w / w.sum(axis=1, keepdims=True)
    return out


class Classifier:
    """Common surface: ``proba`` gives an ``(m, q)`` matrix, ``predict`` labels."""

    q: int
    soft: bool = False

    def proba(self, x) -> np.ndarray:
        lab = self.predict(x)
        out = np.zeros((lab.shape[0], self.q))
        out[np.arange(lab.shape[0]), lab - 1] = 1.0
        return out

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.proba(x), axis=1) + 1


class _Trained(Classifier):
    def __init__(self, dataset: Dataset, labeling: Labeling):
        labeling.check(dataset)
        self.dataset = dataset
        self.labeling = labeling
        self.q = labeling.q


class SoftNNClassifier(_Trained):
    soft = True

    def __init__(self, dataset: Dataset, labeling: Labeling, h_star: float):
        if not h_star > 0:
            raise ValueError(f"h_star must be positive, got {h_star}")
        super().__init__(dataset, labeling)
        self.h_star = float(h_star)

    def proba(self, x) -> np.ndarray:
        x = _queries(x, self.dataset.d)
        return _class_weights(self.dataset.points, self.labeling.index, self.q, self.h_star, x)


class NNClassifier(_Trained):
    def predict(self, x) -> np.ndarray:
        x = _queries(x, self.dataset.d)
        pts = self.dataset.points
        out = np.empty(x.shape[0], dtype=np.int64)
        for rows in _row_blocks(x.shape[0], pts.shape[0], pts.shape[1]):
            out[rows] = np.argmin(_sqdist(x[rows], pts), axis=1)
        return self.labeling.labels[out]


class PluginClassifier(_Trained):
    """Plug-in rule; ``proba`` returns the regression estimate and ``soft``
    stays False because the classifier itself outputs the argmax label."""

    def __init__(self, dataset: Dataset, labeling: Labeling, h: float):
        if not h > 0:
            raise ValueError(f"bandwidth must be positive, got {h}")
        super().__init__(dataset, labeling)
        self.h = float(h)

    def regression(self, x) -> np.ndarray:
        x = _queries(x, self.dataset.d)
        return _class_weights(self.dataset.points, self.labeling.index, self.q, self.h, x)

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.regression(x), axis=1) + 1


class BayesClassifier(Classifier):
    def __init__(self, model: MixtureModel):
        self.model = model
        self.q = model.q

    def predict(self, x) -> np.ndarray:
        pts = self.model._as_points(x)
        if not np.all(self.model.domain.contains(pts)):
            raise ValueError("query lies outside the model domain")
        return np.argmax(self.model.posterior(pts), axis=1) + 1


class ConstantClassifier(Classifier):
    """Outputs the same class probabilities everywhere.

    A one-hot ``probs`` is treated as a hard classifier.
    """

    def __init__(self, probs, d: int = 1):
        p = np.asarray(probs, dtype=float)
        if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probs must be a probability vector")
        self.probs = p
        self.q = p.size
        self.d = d
        self.soft = bool(np.count_nonzero(p) > 1)

    @classmethod
    def always(cls, label: int, q: int, d: int = 1) -> "ConstantClassifier":
        p = np.zeros(q)
        p[label - 1] = 1.0
        return cls(p, d)

    def proba(self, x) -> np.ndarray:
        m = _queries(x, self.d).shape[0]
        return np.tile(self.probs, (m, 1))


def soft_nn_posterior(dataset: Dataset, labeling: Labeling, h_star: float, x) -> np.ndarray:
    return SoftNNClassifier(dataset, labeling, h_star).proba(np.reshape(x, (1, dataset.d)))[0]


def nn_classify(dataset: Dataset, labeling: Labeling, x) -> int:
    return int(NNClassifier(dataset, labeling).predict(np.reshape(x, (1, dataset.d)))[0])


def plugin_regression(dataset: Dataset, labeling: Labeling, h: float, x) -> np.ndarray:
    """Kernel regression estimate of the posterior; sums to one by construction."""
    return PluginClassifier(dataset, labeling, h).regression(np.reshape(x, (1, dataset.d)))[0]


def plugin_classify(dataset: Dataset, labeling: Labeling, h: float, x) -> int:
    return int(PluginClassifier(dataset, labeling, h).predict(np.reshape(x, (1, dataset.d)))[0])


def bayes_classify(model: MixtureModel, x) -> int:
    return int(BayesClassifier(model).predict(x)[0])
