"""Kernel density estimates, plug-in and soft nearest-neighbour classifiers,
their pairwise error-bound kernels, and spectral clustering on those kernels."""

from .bounds import (
    SimilarityMatrix,
    cut_objective,
    gauss_similarity,
    nn_similarity,
    pairwise_bound,
    plugin_similarity,
)
from .classifiers import (
    BayesClassifier,
    ConstantClassifier,
    NNClassifier,
    PluginClassifier,
    SoftNNClassifier,
)
from .density import BandwidthSchedule, class_kde, gaussian_kernel, generalized_kde, kde
from .evaluation import (
    ConvergenceReport,
    RiskReport,
    bayes_boundary,
    classifier_risk_monte_carlo,
    classifier_risk_quadrature,
    misclassified_volume,
    weighted_boundary_volume,
)
from .mixture import Dataset, Domain, GaussianComponent, Labeling, MixtureModel, sample_mixture
from .spectral import exhaustive_min_cut, kmeans, normalized_laplacian, spectral_cluster

__version__ = "0.1.0"

__all__ = [
    "SimilarityMatrix", "cut_objective", "gauss_similarity", "nn_similarity", "pairwise_bound",
    "plugin_similarity", "BayesClassifier", "ConstantClassifier", "NNClassifier", "PluginClassifier",
    "SoftNNClassifier", "BandwidthSchedule", "class_kde", "gaussian_kernel", "generalized_kde", "kde",
    "ConvergenceReport", "RiskReport", "bayes_boundary", "classifier_risk_monte_carlo",
    "classifier_risk_quadrature", "misclassified_volume", "weighted_boundary_volume", "Dataset",
    "Domain", "GaussianComponent", "Labeling", "MixtureModel", "sample_mixture",
    "exhaustive_min_cut", "kmeans", "normalized_laplacian", "spectral_cluster",
]
