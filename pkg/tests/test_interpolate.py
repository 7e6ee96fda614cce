import numpy as np
import pytest

from conftest import flat_dataset
from fsml.errors import ExtrapolationError, ParameterError
from fsml.interpolate import CoordinateMapModel, interpolate_mu, local_linear_intercepts, tangent_design


def test_flat_oracle_held_out():
    X, w, Z, _ = flat_dataset(150, 2)
    model = CoordinateMapModel(X[:120], w, Z[:120], h_reg=1.0, k_pca=15)
    mu = model.predict(X[120:])
    assert np.abs(mu - Z[120:]).max() < 1e-4


def test_training_point_small_bandwidth():
    X, w, Z, _ = flat_dataset(80, 3)
    model = CoordinateMapModel(X, w, Z, h_reg=0.05, k_pca=10)
    for j in (0, 17, 40):
        mu = interpolate_mu(model, X[j])
        assert mu.shape == (2,)
        assert np.abs(mu - Z[j]).max() < 0.05


def test_constant_embedding(swiss_small, weights):
    X, _ = swiss_small
    Z = np.tile([1.5, -2.0], (len(X), 1))
    model = CoordinateMapModel(X[:100], weights, Z[:100], h_reg=1.0, k_pca=15)
    np.testing.assert_allclose(model.predict(X[100:]), Z[100:], atol=1e-9)


def test_affine_reproduction(swiss_small, weights):
    X, _ = swiss_small
    x = X[0]
    chi, dist = tangent_design(X[1:], weights, x, 15, 2)
    A = np.array([[2.0, -1.0], [0.5, 3.0]])
    b = np.array([0.3, -0.7])
    Z = chi[0] @ A + b
    mu, ok = local_linear_intercepts(chi, dist, Z, "gaussian", 2.0, 0.0)
    assert ok[0]
    np.testing.assert_allclose(mu[0], b, atol=1e-8)


def test_weight_scaling_invariance(swiss_small, weights):
    # intercepts match a weighted least-squares fit whose weights are scaled by 7
    X, _ = swiss_small
    Z = np.random.default_rng(0).normal(size=(len(X) - 5, 2))
    chi, dist = tangent_design(X[5:], weights, X[:5], 15, 2)
    mu, _ = local_linear_intercepts(chi, dist, Z, "gaussian", 1.0, 0.0)
    w = np.exp(-0.5 * dist**2)
    for a in range(5):
        Xd = np.column_stack([np.ones(len(Z)), chi[a]])
        W = 7.0 * w[a]
        coef = np.linalg.solve((Xd.T * W) @ Xd, (Xd.T * W) @ Z)
        np.testing.assert_allclose(mu[a], coef[0], rtol=1e-8, atol=1e-10)


def test_translation_equivariance(swiss_small, weights):
    X, _ = swiss_small
    Z = np.random.default_rng(1).normal(size=(100, 2))
    shift = np.cos(np.linspace(0, 3, X.shape[1])) * 5
    m1 = CoordinateMapModel(X[:100], weights, Z, 1.0, 15)
    m2 = CoordinateMapModel(X[:100] + shift, weights, Z, 1.0, 15)
    np.testing.assert_allclose(m1.predict(X[100:]), m2.predict(X[100:] + shift), atol=1e-10)


def test_ridge_keeps_small_bandwidth_finite(swiss_small, weights):
    X, _ = swiss_small
    Z = np.random.default_rng(2).normal(size=(100, 2))
    D = np.sqrt(((X[:100, None] - X[None, :100]) ** 2) @ weights)
    hmin = D[D > 0].min()
    for h in (hmin, 2 * hmin, 10 * hmin):
        mu, ok, _ = CoordinateMapModel(X[:100], weights, Z, h, 15).predict_partial(X[100:])
        assert np.all(np.isfinite(mu[ok]))


def test_extrapolation_error_names_distance(swiss_small, weights):
    X, _ = swiss_small
    Z = np.zeros((len(X), 2))
    model = CoordinateMapModel(X, weights, Z, 0.01, 15)
    with pytest.raises(ExtrapolationError, match="nearest training distance"):
        model.predict(X[0] + 1000.0)


def test_model_validation(swiss_small, weights):
    X, _ = swiss_small
    with pytest.raises(ParameterError):
        CoordinateMapModel(X, weights, np.zeros((3, 2)), 1.0, 15)
    with pytest.raises(ParameterError):
        CoordinateMapModel(X, weights, np.zeros((len(X), 2)), 0.0, 15)
    m = CoordinateMapModel(X, weights, np.zeros((len(X), 2)), 1.0, 15)
    assert m.ridge == len(X) ** -3.0
