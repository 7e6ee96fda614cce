"""Label-penalised proximities and classical multidimensional scaling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


def penalized_proximity(distances, labels, xi):
    """Add ``xi / (d + sqrt(xi))`` to every distance between differently labelled curves.

    The penalty shrinks with distance, so among pairs of unlike labels the
    ordering of distances is unchanged, and it never exceeds ``sqrt(xi)``.
    """
    D = np.asarray(getattr(distances, "matrix", distances), dtype=float)
    if xi < 0 or not np.isfinite(xi):
        raise ParameterError(f"penalty xi must be a nonnegative number, got {xi}")
    if xi == 0:
        return D.copy()
    labels = np.asarray(labels)
    differ = labels[:, None] != labels[None, :]
    root = np.sqrt(xi)
    # D + xi / (D + root) rewritten as root + D / (1 + root / D): every rounded
    # step then moves the same way as D, so the order of distances never flips
    with np.errstate(divide="ignore"):
        pen = root + D / (1.0 + root / D)
    pen = np.maximum(np.minimum(pen, D + root), D)
    out = np.where(differ, pen, D)
    np.fill_diagonal(out, 0.0)
    return out


@dataclass
class Embedding:
    coords: np.ndarray  # (n, d), columns by descending eigenvalue
    eigenvalues: np.ndarray  # all n eigenvalues of the centred Gram matrix, descending
    epsilon_mds: float
    negative_mass: float  # total |lambda| over negative eigenvalues

    @property
    def d(self):
        return self.coords.shape[1]


def pairwise_euclidean(Z):
    Z = np.asarray(Z, dtype=float)
    diff = Z[:, None, :] - Z[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def classical_mds(prox, d) -> Embedding:
    """Torgerson scaling of a (possibly non-Euclidean) proximity matrix.

    Parameters
    ----------
    prox : ndarray, shape (n, n)
        Symmetric proximities with zero diagonal.
    d : int
        Target dimension, ``1 <= d <= n - 1``.

    Returns
    -------
    Embedding
        Negative retained eigenvalues are clipped to zero. ``epsilon_mds`` is
        the largest absolute gap between a proximity and the embedded
        Euclidean distance over all pairs.
    """
    D = np.asarray(prox, dtype=float)
    n = D.shape[0]
    if not 1 <= d <= n - 1:
        raise ParameterError(f"embedding dimension must lie in 1..{n - 1}, got {d}")
    D2 = D * D
    row = D2.mean(axis=1)
    B = -0.5 * (D2 - row[:, None] - row[None, :] + row.mean())
    B = (B + B.T) / 2.0
    evals, evecs = np.linalg.eigh(B)
    evals = evals[::-1]
    evecs = evecs[:, ::-1]
    lam = np.clip(evals[:d], 0.0, None)
    coords = evecs[:, :d] * np.sqrt(lam)
    idx = np.argmax(np.abs(coords), axis=0)
    signs = np.where(coords[idx, np.arange(d)] < 0, -1.0, 1.0)
    coords = coords * signs
    # exact centring; eigenvectors orthogonal to 1 only up to rounding
    coords = coords - coords.mean(axis=0)
    eps = float(np.max(np.abs(D - pairwise_euclidean(coords)))) if n > 1 else 0.0
    neg = float(-np.sum(evals[evals < 0]))
    return Embedding(coords, evals, eps, neg)
