import math

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import norm

from boundcut.mixture import (
    Dataset,
    Domain,
    GaussianComponent,
    Labeling,
    MixtureModel,
    SamplingError,
    mixture_density,
    sample_mixture,
)


def test_sampling_is_deterministic(two_gauss):
    a, la = sample_mixture(two_gauss, 500, 11)
    b, lb = sample_mixture(two_gauss, 500, 11)
    assert a.points.tobytes() == b.points.tobytes()
    assert la.labels.tobytes() == lb.labels.tobytes()


def test_sample_mean_within_four_standard_errors():
    model = MixtureModel.gaussians([[0.0]], [1.0])
    data, _ = sample_mixture(model, 10_000, 3)
    assert abs(data.points.mean()) < 4.0 / math.sqrt(10_000)


def test_degenerate_prior_gives_one_label():
    model = MixtureModel.gaussians([[-1.0], [1.0]], [1.0, 1.0], priors=[1.0, 0.0])
    _, lab = sample_mixture(model, 300, 0)
    assert np.all(lab.labels == 1)


def test_sampling_failure_for_component_outside_domain():
    comp = GaussianComponent([8.0], [0.5])  # box mass ~ 1e-44
    model = MixtureModel([1.0], (((1.0, comp),),), Domain(1, 1.0))
    with pytest.raises(SamplingError):
        sample_mixture(model, 5, 0, max_rounds=3)


def test_density_at_symmetric_point(two_gauss):
    f, fi, eta = mixture_density(two_gauss, 0.0)
    np.testing.assert_allclose(eta, [0.5, 0.5], atol=1e-15)
    m0 = two_gauss.domain.m0
    # truncation factor of N(1, 1) on the box, by quadrature
    mass = integrate.quad(lambda x: norm.pdf(x, 1.0), -m0, m0, epsabs=1e-14)[0]
    assert f == pytest.approx(norm.pdf(1.0) / mass, rel=1e-9)
    assert f == pytest.approx(0.241971, abs=5e-7)
    np.testing.assert_allclose(fi, [f, f], rtol=1e-12)


def test_single_class_posterior_is_one():
    model = MixtureModel.gaussians([[0.3]], [0.7])
    _, _, eta = mixture_density(model, 0.1)
    np.testing.assert_array_equal(eta, [1.0])


def test_density_rejects_points_outside_domain(two_gauss):
    with pytest.raises(ValueError):
        mixture_density(two_gauss, two_gauss.domain.m0 + 1.0)


def test_posterior_sums_to_one_on_grid():
    model = MixtureModel.gaussians([[-1.0, 0.0], [1.0, 0.5], [0.0, -2.0]], [0.5, 1.0, 0.8], [0.2, 0.5, 0.3])
    g = np.linspace(-model.domain.m0, model.domain.m0, 41)
    pts = np.array([[x, y] for x in g for y in g])
    eta = model.posterior(pts)
    assert np.max(np.abs(eta.sum(axis=1) - 1.0)) < 1e-12


@pytest.mark.parametrize(
    "model",
    [
        MixtureModel.gaussians([[-1.0], [1.0]], [1.0, 1.0]),
        MixtureModel.gaussians([[-1.0], [1.0]], [0.5, 0.5], m0=2.0),
        MixtureModel(
            [0.4, 0.6],
            (
                ((0.3, GaussianComponent([-2.0], [0.5])), (0.7, GaussianComponent([0.5], [1.5]))),
                ((1.0, GaussianComponent([1.0], [0.3])),),
            ),
            Domain(1, 3.0),
        ),
    ],
)
def test_density_integrates_to_one(model):
    m0 = model.domain.m0
    total = integrate.quad(lambda x: model.density(np.array([[x]]))[0], -m0, m0, limit=200, epsabs=1e-12)[0]
    assert total == pytest.approx(1.0, abs=1e-6)
    for i in range(model.q):
        ci = integrate.quad(lambda x: model.class_densities(np.array([[x]]))[0, i], -m0, m0, limit=200)[0]
        assert ci == pytest.approx(1.0, abs=1e-6)


def test_theta_symmetric_zero_diagonal():
    lab = Labeling.from_sequence([1, 2, 2, 3, 1])
    t = lab.theta()
    np.testing.assert_array_equal(t, t.T)
    assert np.all(np.diag(t) == 0)
    assert t[0, 1] == 1 and t[1, 2] == 0


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(Domain(1, 1.0), np.array([[2.0]]))
    with pytest.raises(ValueError):
        Dataset(Domain(2, 1.0), np.zeros((0, 2)))
    data = Dataset(Domain(1, 1.0), np.array([[0.5]]))
    with pytest.raises((AttributeError, TypeError, ValueError)):
        data.points[0, 0] = 0.0


def test_labeling_validation():
    with pytest.raises(ValueError):
        Labeling(np.array([0, 1]), 2)
    with pytest.raises(ValueError):
        Labeling(np.array([1, 3]), 2)
    data = Dataset(Domain(1, 1.0), np.zeros((3, 1)))
    with pytest.raises(ValueError):
        Labeling.from_sequence([1, 2]).check(data)


def test_default_box_keeps_truncation_tiny():
    model = MixtureModel.gaussians([[-3.0], [2.0]], [0.5, 1.5])
    for cls in model.components:
        for _, c in cls:
            assert 1.0 - c.box_mass(model.domain.m0) < 1e-6
