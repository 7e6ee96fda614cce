import numpy as np
import pytest

from fsml.errors import ParameterError
from fsml.synth import (
    MODELS,
    TORUS_BASIS,
    SynthSpec,
    fourier_basis,
    generate,
    integrated_variance,
    swiss_roll_arclength,
    torus_angles,
    torus_coefficients,
    warping_family,
)


def test_spec_validation():
    assert SynthSpec("EX2", 5).model == "example2"
    for bad in (dict(model="vi", n=5), dict(model="ii", n=1), dict(model="ii", n=5, J=1)):
        with pytest.raises(ParameterError):
            SynthSpec(**bad)


@pytest.mark.parametrize("model", MODELS)
def test_generators_are_seed_pure(model):
    a = generate(SynthSpec(model, 30, 20, seed=4))
    b = generate(SynthSpec(model, 30, 20, seed=4))
    c = generate(SynthSpec(model, 30, 20, seed=5))
    np.testing.assert_array_equal(a.observed, b.observed)
    np.testing.assert_array_equal(a.latent, b.latent)
    assert not np.array_equal(a.observed, c.observed)
    assert a.observed.shape == (30, 20) and a.times[0] == 0.0 and a.times[-1] == 1.0
    assert set(np.unique(a.labels)) <= {0, 1}


def test_model_ii_span():
    sim = generate(SynthSpec("ii", 100, 50, noise=False, seed=1))
    t = sim.times
    B = np.vstack([np.sin(2 * np.pi * t), np.cos(2 * np.pi * t), np.sin(4 * np.pi * t)]).T
    coef, *_ = np.linalg.lstsq(B, sim.clean.T, rcond=None)
    assert np.abs(B @ coef - sim.clean.T).max() < 1e-10


def test_model_iv_at_zero():
    sim = generate(SynthSpec("iv", 50, 30, noise=False, seed=2))
    np.testing.assert_allclose(sim.clean[:, 0], sim.latent[:, 0] * np.log(2.0), rtol=0, atol=1e-13)


def test_model_v_score_variances():
    sim = generate(SynthSpec("v", 10000, 10, noise=False, seed=3))
    scores = sim.latent[sim.labels == 0]
    assert len(scores) >= 4900
    for j in range(1, 7):
        assert scores[:, j - 1].var() == pytest.approx(np.exp(-j / 3.0), rel=0.05)


def test_fourier_basis_orthonormal():
    t = np.linspace(0, 1, 4001)
    B = fourier_basis(t, 9)
    w = np.full(len(t), t[1])
    w[[0, -1]] /= 2
    np.testing.assert_allclose((B * w) @ B.T, np.eye(9), atol=1e-6)


def test_torus_identity():
    sim = generate(SynthSpec("iii", 200, 50, noise=False, seed=4))
    theta, phi = sim.latent.T
    assert np.all(theta[sim.labels == 0] < phi[sim.labels == 0])
    assert np.all(theta[sim.labels == 1] >= phi[sim.labels == 1])
    basis = np.vstack([f(sim.times) for f in TORUS_BASIS])
    coef = np.linalg.lstsq(basis.T, sim.clean.T, rcond=None)[0].T
    th, ph = torus_angles(coef)
    np.testing.assert_allclose(torus_coefficients(th, ph) @ basis, sim.clean, atol=1e-10)
    np.testing.assert_allclose(th, theta, atol=1e-10)
    np.testing.assert_allclose(ph, phi, atol=1e-10)


def test_model_i_warp_endpoints():
    sim = generate(SynthSpec("i", 40, 50, noise=False, seed=5))
    z1 = sim.latent[:, 0]
    # gamma(0) = 0 and gamma(1) = 1, so the endpoints are fixed multiples of z1
    pdf = lambda x, m, s: np.exp(-0.5 * ((x - m) / s) ** 2) / (s * np.sqrt(2 * np.pi))
    base = lambda x: pdf(x, 0.2, 0.08) + pdf(x, 0.5, 0.1) + pdf(x, 0.8, 0.13)
    np.testing.assert_allclose(sim.clean[:, 0], z1 * base(0.0), rtol=1e-12)
    np.testing.assert_allclose(sim.clean[:, -1], z1 * base(1.0), rtol=1e-12)
    assert z1.mean() == pytest.approx(2.0, rel=0.25)


def test_noise_protocol():
    sim = generate(SynthSpec("ii", 400, 50, seed=6))
    target = integrated_variance(sim.clean, sim.times) / 20
    assert sim.noise_variance == target
    resid = sim.observed - sim.clean
    assert resid.var() == pytest.approx(target, rel=0.10)
    quiet = generate(SynthSpec("ii", 10, 50, noise=False, seed=6))
    assert quiet.noise_variance == 0.0
    np.testing.assert_array_equal(quiet.observed, quiet.clean)


def test_labels_bernoulli_half():
    y = generate(SynthSpec("iv", 4000, 5, noise=False, seed=7)).labels
    assert abs(y.mean() - 0.5) < 0.03


def test_example2_family():
    sim = generate(SynthSpec("example2", 200, 60, noise=False, seed=8))
    omega = sim.latent[:, 0]
    np.testing.assert_array_equal(sim.labels, (omega > np.pi).astype(int))
    # every warp fixes the endpoints, so g(0) = g(1) = 0
    np.testing.assert_allclose(sim.clean[:, [0, -1]], 0.0, atol=1e-12)
    np.testing.assert_allclose(warping_family([0.0], sim.times)[0], np.sin(2 * np.pi * sim.times), atol=1e-12)
    # omega and omega + 2 pi give the same curve
    np.testing.assert_allclose(warping_family([1.0], sim.times), warping_family([1.0 + 2 * np.pi], sim.times),
                               atol=1e-12)


def test_swiss_roll_arclength():
    z = np.linspace(0, 2 * np.pi, 20001)
    dz = np.diff(z)
    speed = np.sqrt(1 + z * z)
    numeric = np.concatenate([[0], np.cumsum((speed[1:] + speed[:-1]) / 2 * dz)])
    np.testing.assert_allclose(swiss_roll_arclength(z), numeric, atol=1e-6)
