"""Out-of-sample coordinate map by local-linear regression on tangent spaces."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ExtrapolationError, ParameterError
from .fda import GAUSSIAN, Kernel, get_kernel
from .geometry import local_pca

WEIGHT_FLOOR = 1e-300


def tangent_design(train, weights, queries, k_pca, d):
    """Tangent-space coordinates of every training curve around each query.

    Returns
    -------
    chi : ndarray, shape (q, n, d)
        ``chi[a, i]`` are the coordinates of ``train[i] - queries[a]`` in the
        estimated tangent frame at ``queries[a]``.
    dist : ndarray, shape (q, n)
        L2 distances ``||train[i] - queries[a]||``.
    """
    queries = np.atleast_2d(queries)
    q, n = queries.shape[0], train.shape[0]
    chi = np.empty((q, n, d))
    dist = np.empty((q, n))
    for a in range(q):
        diff = train - queries[a]
        dist[a] = np.sqrt((diff * diff) @ weights)
        frame = local_pca(train, weights, queries[a], k_pca, d, dist_row=dist[a])
        chi[a] = diff @ (weights[:, None] * frame.basis.T)
    return chi, dist


def local_linear_intercepts(chi, dist, Z, kernel, h, ridge):
    """Weighted least-squares intercepts for a batch of queries.

    Returns the (q, dz) fitted values and a boolean mask of queries whose
    kernel weights are not all below the underflow floor. Rows failing the
    mask are NaN.
    """
    kernel = get_kernel(kernel)
    q, n, d = chi.shape
    w = kernel(dist / h) / h**d
    ok = np.any(w >= WEIGHT_FLOOR, axis=1)
    X = np.concatenate([np.ones((q, n, 1)), chi], axis=2)
    XtW = np.swapaxes(X, 1, 2) * w[:, None, :]
    M = XtW @ X
    rhs = XtW @ Z
    smin = np.linalg.svd(M, compute_uv=False)[:, -1]
    engage = smin < ridge
    M = M + engage[:, None, None] * ridge * np.eye(d + 1)
    out = np.full((q, Z.shape[1]), np.nan)
    if np.any(ok):
        out[ok] = np.linalg.solve(M[ok], rhs[ok])[:, 0, :]
    return out, ok


@dataclass
class CoordinateMapModel:
    """Training curves and embedding from which the coordinate map is interpolated."""

    train: np.ndarray  # (n, G) smoothed training curves
    weights: np.ndarray  # (G,) quadrature weights
    coords: np.ndarray  # (n, d) embedding
    h_reg: float
    k_pca: int
    kernel: Kernel = GAUSSIAN
    ridge: Optional[float] = None

    def __post_init__(self):
        self.kernel = get_kernel(self.kernel)
        n = self.train.shape[0]
        if self.coords.shape[0] != n:
            raise ParameterError("embedding rows must match the training curves")
        if not self.h_reg > 0:
            raise ParameterError(f"h_reg must be positive, got {self.h_reg}")
        if self.ridge is None:
            self.ridge = float(n) ** -3
        if self.ridge < 0:
            raise ParameterError("ridge must be nonnegative")

    @property
    def d(self):
        return self.coords.shape[1]

    def predict_partial(self, queries):
        """Like :meth:`predict` for a batch, but returns ``(mu, ok)`` instead of raising."""
        Q = np.atleast_2d(getattr(queries, "values", queries))
        chi, dist = tangent_design(self.train, self.weights, Q, self.k_pca, self.d)
        mu, ok = local_linear_intercepts(chi, dist, self.coords, self.kernel, self.h_reg, self.ridge)
        return mu, ok, dist

    def predict(self, queries):
        """Coordinate-map estimates for one curve (G,) or a batch (q, G)."""
        single = np.ndim(getattr(queries, "values", queries)) == 1
        mu, ok, dist = self.predict_partial(queries)
        if not np.all(ok):
            a = int(np.argmin(ok))
            raise ExtrapolationError(
                f"query {a} is too far from the training data: nearest training "
                f"distance {dist[a].min():.4g} vs bandwidth {self.h_reg:.4g}"
            )
        return mu[0] if single else mu


def interpolate_mu(model: CoordinateMapModel, x):
    return model.predict(x)
