"""Nested cross-validation for the label penalty and the regression bandwidth.

The outer folds score each penalty by misclassification; inside every outer
training set a second split picks the coordinate-map bandwidth by squared
embedding error. Geodesic distances are computed once on the full sample and
restricted to each training set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classify import make_head
from .embedding import classical_mds, penalized_proximity
from .errors import FoldConstructionError, ParameterError
from .fda import GAUSSIAN, get_kernel, pairwise_l2
from .interpolate import local_linear_intercepts, tangent_design


@dataclass
class CvPlan:
    """Fold count, search grids (``xi`` itself, not its square root) and seed."""

    folds: int = 10
    xi_grid: tuple = (0.0,)
    h_grid: tuple = (1.0,)
    seed: int = 0
    stratify: bool = True

    def __post_init__(self):
        self.xi_grid = tuple(float(x) for x in self.xi_grid)
        self.h_grid = tuple(float(h) for h in self.h_grid)
        if self.folds < 2:
            raise ParameterError(f"need at least 2 folds, got {self.folds}")
        if not self.xi_grid or not self.h_grid:
            raise ParameterError("search grids must be nonempty")
        if any(x < 0 for x in self.xi_grid):
            raise ParameterError("xi grid values must be nonnegative")
        if any(h <= 0 for h in self.h_grid):
            raise ParameterError("bandwidth grid values must be positive")
        if list(self.xi_grid) != sorted(self.xi_grid) or list(self.h_grid) != sorted(self.h_grid):
            raise ParameterError("search grids must be ascending")


def default_xi_grid(distances):
    """Squares of {0, q25, q50, q75, q90} of the off-diagonal geodesic distances."""
    D = np.asarray(getattr(distances, "matrix", distances))
    off = D[~np.eye(D.shape[0], dtype=bool)]
    roots = np.concatenate([[0.0], np.quantile(off, [0.25, 0.5, 0.75, 0.9])])
    return tuple(np.unique(roots**2))


def default_h_grid(values=None, weights=None, dist=None, k_pca=15, count=7):
    """``count`` log-spaced bandwidths spanning the local neighbourhood scale.

    The range runs from half the median nearest-neighbour L2 distance to the
    median distance to the ``k_pca``-th neighbour.
    """
    if dist is None:
        dist = pairwise_l2(values, weights)
    n = dist.shape[0]
    ordered = np.sort(dist + np.diag(np.full(n, np.inf)), axis=1)
    k = min(max(int(k_pca), 1), n - 1)
    lo = 0.5 * float(np.median(ordered[:, 0]))
    hi = float(np.median(ordered[:, k - 1]))
    if not lo > 0:
        lo = hi / 10.0 if hi > 0 else 1.0
        hi = max(hi, lo)
    return tuple(np.geomspace(lo, hi, count)) if hi > lo else (float(lo),)


def make_folds(labels, folds, rng, stratify=True):
    """Fold index for every observation; fold sizes differ by at most one.

    With ``stratify`` each class is shuffled and dealt round-robin so every
    fold sees every class whenever the class has at least ``folds`` members.
    A plain random split that leaves some training complement without a class
    is redone stratified.
    """
    labels = np.asarray(labels)
    n = len(labels)
    if not 2 <= folds <= n:
        raise FoldConstructionError(f"cannot split {n} observations into {folds} folds")
    if stratify:
        order = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in np.unique(labels)])
    else:
        order = rng.permutation(n)
    assign = np.empty(n, dtype=int)
    assign[order] = np.arange(n) % folds
    classes = np.unique(labels)
    for f in range(folds):
        if len(np.unique(labels[assign != f])) < len(classes):
            if not stratify:
                return make_folds(labels, folds, rng, stratify=True)
            raise FoldConstructionError(
                f"fold {f}: its training complement misses a class; some class has too few members"
            )
    return assign


@dataclass
class CvResult:
    """Per-head outcome of :func:`nested_cv_select`.

    ``misclassified[head]`` and ``h_inner`` are (len(xi_grid), folds) arrays.
    """

    plan: CvPlan
    heads: tuple
    misclassified: dict
    h_inner: np.ndarray
    inner_loss: np.ndarray  # (len(xi_grid), folds, len(h_grid))
    folds: np.ndarray = field(repr=False)

    def cv_loss(self, head=None):
        head = self.heads[0] if head is None else head
        return self.misclassified[head].sum(axis=1)

    def xi_index(self, head=None):
        # argmin picks the first, i.e. smallest, xi among ties
        return int(np.argmin(self.cv_loss(head)))

    def selected(self, head=None):
        """(xi, mean inner bandwidth of the winning xi)."""
        k = self.xi_index(head)
        return self.plan.xi_grid[k], float(np.mean(self.h_inner[k]))

    def h_bar(self, xi_index):
        return float(np.mean(self.h_inner[xi_index]))

    def rows(self, head=None):
        """Tuples (xi, fold, misclassifications, h_inner) in grid-then-fold order."""
        head = self.heads[0] if head is None else head
        out = []
        for a, xi in enumerate(self.plan.xi_grid):
            for f in range(self.plan.folds):
                out.append((xi, f, int(self.misclassified[head][a, f]), float(self.h_inner[a, f])))
        return out


def nested_cv_select(values, weights, labels, distances, plan: CvPlan, heads=("knn:20",), k_pca=15, d=2,
                     kernel=GAUSSIAN, ridge=None) -> CvResult:
    """Run the nested L-fold search and return losses for every head.

    The inner bandwidth search does not involve the classifier, so all heads
    share it and are scored on the same outer predictions.
    """
    kernel = get_kernel(kernel)
    X = np.asarray(values, dtype=float)
    y = np.asarray(labels, dtype=int)
    D = np.asarray(getattr(distances, "matrix", distances), dtype=float)
    heads = tuple(make_head(h).spec for h in heads)
    L = plan.folds
    rng = np.random.default_rng(plan.seed)
    outer = make_folds(y, L, rng, plan.stratify)
    nx, nh = len(plan.xi_grid), len(plan.h_grid)
    miscl = {h: np.zeros((nx, L), dtype=int) for h in heads}
    h_inner = np.zeros((nx, L))
    inner_loss = np.zeros((nx, L, nh))

    for ell in range(L):
        tr = np.flatnonzero(outer != ell)
        te = np.flatnonzero(outer == ell)
        y_tr = y[tr]
        r = ridge if ridge is not None else float(len(tr)) ** -3
        inner = make_folds(y_tr, L, np.random.default_rng([plan.seed, ell + 1]), plan.stratify)
        designs = []
        for m in range(L):
            a = np.flatnonzero(inner != m)
            b = np.flatnonzero(inner == m)
            chi, dist = tangent_design(X[tr[a]], weights, X[tr[b]], k_pca, d)
            designs.append((a, b, chi, dist, float(len(a)) ** -3 if ridge is None else ridge))
        chi_o, dist_o = tangent_design(X[tr], weights, X[te], k_pca, d)
        D_tr = D[np.ix_(tr, tr)]

        for ix, xi in enumerate(plan.xi_grid):
            Z = classical_mds(penalized_proximity(D_tr, y_tr, xi), d).coords
            for ih, h in enumerate(plan.h_grid):
                loss = 0.0
                for a, b, chi, dist, rr in designs:
                    mu, ok = local_linear_intercepts(chi, dist, Z[a], kernel, h, rr)
                    if not np.all(ok):
                        loss = np.inf
                        break
                    loss += float(np.sum((Z[b] - mu) ** 2))
                inner_loss[ix, ell, ih] = loss
            losses = inner_loss[ix, ell]
            # all candidates extrapolate somewhere: fall back to the widest bandwidth
            best = int(np.argmin(losses)) if np.any(np.isfinite(losses)) else nh - 1
            h = plan.h_grid[best]
            h_inner[ix, ell] = h
            mu, ok = local_linear_intercepts(chi_o, dist_o, Z, kernel, h, r)
            for spec in heads:
                head = make_head(spec).fit(Z, y_tr)
                wrong = np.count_nonzero(~ok)
                if np.any(ok):
                    wrong += int(np.count_nonzero(head.predict(mu[ok]) != y[te][ok]))
                miscl[spec][ix, ell] = wrong

    return CvResult(plan, heads, miscl, h_inner, inner_loss, outer)
