"""Seeded generators for the benchmark curve models.

Every model returns curves sampled at J equidistant points on [0, 1] together
with binary labels and the latent variables that generated each curve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .fda import SampledCurve

MODELS = ("i", "ii", "iii", "iv", "v", "example2")

# intrinsic dimension of each model where it is known by construction
TRUE_DIMENSION = {"i": 2, "ii": 2, "iii": 2, "iv": 3, "example2": 1}


@dataclass(frozen=True)
class SynthSpec:
    model: str
    n: int
    J: int = 50
    noise: bool = True
    seed: int = 0
    k0: int = 50  # truncation of the warping series in the example2 model

    def __post_init__(self):
        model = str(self.model).lower()
        if model in ("2", "ex2"):
            model = "example2"
        if model not in MODELS:
            raise ParameterError(f"unknown model {self.model!r}; choose from {MODELS}")
        if self.n < 2:
            raise ParameterError(f"n must be >= 2, got {self.n}")
        if self.J < 2:
            raise ParameterError(f"J must be >= 2, got {self.J}")
        object.__setattr__(self, "model", model)


@dataclass
class SynthData:
    times: np.ndarray  # (J,)
    clean: np.ndarray  # (n, J) noiseless curve values
    observed: np.ndarray  # (n, J) values with observation noise (== clean if noise is off)
    labels: np.ndarray
    latent: np.ndarray  # (n, q) generating variables
    noise_variance: float

    @property
    def intrinsic(self):
        """Latent coordinates for the manifold models, as returned by :func:`generate`."""
        return self.latent

    def sampled_curves(self, prefix="c"):
        return [SampledCurve(f"{prefix}{i}", self.times, self.observed[i]) for i in range(len(self.labels))]


def _normal_pdf(t, mu, sd):
    return np.exp(-0.5 * ((t - mu) / sd) ** 2) / (sd * np.sqrt(2.0 * np.pi))


def _time_warping(rng, labels, t):
    n = len(labels)
    z1 = rng.gamma(shape=4.0, scale=0.5, size=n)
    z2 = np.where(labels == 0, rng.uniform(-1.0, 0.2, n), rng.uniform(-0.2, 1.0, n))
    T = t[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        gamma = np.expm1(z2[:, None] * T) / np.expm1(z2[:, None])
    gamma = np.where(z2[:, None] == 0.0, T, gamma)
    base = _normal_pdf(gamma, 0.2, 0.08) + _normal_pdf(gamma, 0.5, 0.1) + _normal_pdf(gamma, 0.8, 0.13)
    return z1[:, None] * base, np.column_stack([z1, z2])


def _swiss_rolls(rng, labels, t):
    n = len(labels)
    z1 = rng.uniform(0.0, 2.0 * np.pi, n)
    z2 = rng.uniform(0.0, 8.0, n)
    ang = z1 + np.pi * (labels == 1)
    a, b = z1 * np.cos(ang), z1 * np.sin(ang)
    X = a[:, None] * np.sin(2 * np.pi * t) + b[:, None] * np.cos(2 * np.pi * t) + z2[:, None] * np.sin(4 * np.pi * t)
    return X, np.column_stack([z1, z2])


def torus_coefficients(theta, phi):
    r = 2.0 + np.cos(theta)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), np.sin(theta)])


def torus_angles(coef):
    """Invert :func:`torus_coefficients`; angles in [0, 2 pi)."""
    coef = np.atleast_2d(coef)
    phi = np.mod(np.arctan2(coef[:, 1], coef[:, 0]), 2 * np.pi)
    r = np.hypot(coef[:, 0], coef[:, 1])
    theta = np.mod(np.arctan2(coef[:, 2], r - 2.0), 2 * np.pi)
    return theta, phi


TORUS_BASIS = (
    lambda t: np.sin(2 * np.pi * t),
    lambda t: np.cos(2 * np.pi * t),
    lambda t: np.sin(4 * np.pi * t),
)


def _torus(rng, labels, t):
    n = len(labels)
    theta = np.empty(n)
    phi = np.empty(n)
    for i in range(n):
        # rejection from the square onto the class triangle
        while True:
            a, b = rng.uniform(0.0, 2 * np.pi, 2)
            if (labels[i] == 0 and 0 < a < b) or (labels[i] == 1 and b <= a):
                theta[i], phi[i] = a, b
                break
    coef = torus_coefficients(theta, phi)
    basis = np.vstack([f(t) for f in TORUS_BASIS])
    return coef @ basis, np.column_stack([theta, phi])


def _gaussian_one(rng, labels, t):
    mu = np.array([[-1.0, 2.0, -3.0], [-0.5, 2.5, -2.5]])
    sd = np.array([[0.6, 0.4, 0.2], [0.9, 0.5, 0.3]])
    scores = mu[labels] + sd[labels] * rng.standard_normal((len(labels), 3))
    basis = np.vstack([np.log(t + 2.0), t, t**3])
    return scores @ basis, scores


def fourier_basis(t, count=50):
    """phi_1 = 1, phi_{2l} = sqrt2 cos(2 l pi t), phi_{2l+1} = sqrt2 sin(2 l pi t)."""
    out = np.empty((count, len(t)))
    for j in range(1, count + 1):
        if j == 1:
            out[0] = 1.0
        elif j % 2 == 0:
            out[j - 1] = np.sqrt(2.0) * np.cos(j * np.pi * t)
        else:
            out[j - 1] = np.sqrt(2.0) * np.sin((j - 1) * np.pi * t)
    return out


def _gaussian_two(rng, labels, t):
    j = np.arange(1, 51)
    sd = np.where(labels[:, None] == 0, np.exp(-j / 6.0), np.exp(-j / 4.0))
    scores = sd * rng.standard_normal((len(labels), 50))
    X = labels[:, None].astype(float) + scores @ fourier_basis(t)
    return X, scores


def warping_family(omega, t, k0=50, fine=2001):
    """Curves g(gamma_omega(t)) with g = sin(2 pi t) for each angle in ``omega``.

    The warp is the normalised integral of exp(theta_omega); it is evaluated
    by cumulative trapezoid on a fine grid and interpolated to ``t``.
    """
    omega = np.atleast_1d(omega)
    s = np.linspace(0.0, 1.0, fine)
    k = np.arange(1, k0 + 1)
    amp = np.sin(np.outer(omega, k)) / ((k - 8.0) ** 2 + 2.0)  # (n, k0)
    theta = amp @ np.sin(np.pi * np.outer(k, s))  # (n, fine)
    e = np.exp(theta)
    cum = np.concatenate([np.zeros((len(omega), 1)), np.cumsum((e[:, 1:] + e[:, :-1]) / 2 * np.diff(s), axis=1)], axis=1)
    gamma = cum / cum[:, -1:]
    warped = np.vstack([np.interp(t, s, g) for g in gamma])
    return np.sin(2 * np.pi * warped)


def _example2(rng, n, t, k0):
    omega = rng.uniform(0.0, 2 * np.pi, n)
    labels = (omega > np.pi).astype(int)
    return warping_family(omega, t, k0), labels, omega[:, None]


def integrated_variance(X, t):
    """Pointwise sample variance across curves, integrated over [t0, tJ]."""
    v = X.var(axis=0, ddof=1)
    return float(np.sum((v[1:] + v[:-1]) / 2 * np.diff(t)))


def generate(spec: SynthSpec) -> SynthData:
    """Draw one dataset; identical specs give bitwise identical data."""
    rng = np.random.default_rng(spec.seed)
    t = np.linspace(0.0, 1.0, spec.J)
    if spec.model == "example2":
        X, labels, latent = _example2(rng, spec.n, t, spec.k0)
    else:
        labels = rng.binomial(1, 0.5, spec.n)
        maker = {"i": _time_warping, "ii": _swiss_rolls, "iii": _torus, "iv": _gaussian_one, "v": _gaussian_two}
        X, latent = maker[spec.model](rng, labels, t)
    noise_var = 0.0
    observed = X
    if spec.noise:
        noise_var = integrated_variance(X, t) / 20.0
        observed = X + np.sqrt(noise_var) * rng.standard_normal(X.shape)
    return SynthData(t, X, observed, labels.astype(int), latent, noise_var)


def swiss_roll_arclength(z1):
    """Arc length of the planar spiral r -> (r cos r, r sin r) from 0 to ``z1``."""
    z1 = np.asarray(z1, dtype=float)
    return 0.5 * (z1 * np.sqrt(1.0 + z1 * z1) + np.arcsinh(z1))


def swiss_roll_chart(latent, labels):
    """Flat chart of the two-roll surface in L2 units.

    The two spirals meet at the origin, so one roll is mapped to negative
    arc length. The L2 norm of a sin/cos combination on [0, 1] is the
    Euclidean coefficient norm divided by sqrt(2).
    """
    s = swiss_roll_arclength(latent[:, 0])
    s = np.where(np.asarray(labels) == 1, -s, s)
    return np.column_stack([s, latent[:, 1]]) / np.sqrt(2.0)
