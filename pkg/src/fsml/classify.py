"""Multivariate classifier heads trained on embedding coordinates."""

from __future__ import annotations

import warnings

import numba
import numpy as np

from .errors import ParameterError, StateError


class Head:
    """Common interface: ``fit(Z, y)`` then ``predict(Z0)``."""

    name = "head"

    def fit(self, Z, y):
        raise NotImplementedError

    def predict(self, Z0):
        raise NotImplementedError

    def scores(self, Z0):
        return None

    def state(self):
        """Arrays needed to rebuild the fitted head (see :meth:`from_state`)."""
        raise NotImplementedError

    def _check(self, Z0):
        if getattr(self, "classes_", None) is None:
            raise StateError(f"{self.name} head used before fitting")
        return np.atleast_2d(np.asarray(Z0, dtype=float))

    @property
    def spec(self):
        return self.name


def _as_training(Z, y):
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    y = np.asarray(y, dtype=int)
    if Z.shape[0] == 0:
        raise StateError("empty training set")
    if Z.shape[0] != y.shape[0]:
        raise ParameterError("one label per embedding row is required")
    return Z, y


# ---------------------------------------------------------------------------
# k nearest neighbours


def knn_predict(Z_train, y_train, z0, k):
    """Vote among the k training points nearest to each query.

    Neighbours are ordered by distance with ties going to the smaller index.
    Two classes {0, 1}: predict 0 when the neighbour label mean is <= 1/2.
    Otherwise majority vote with ties going to the smallest label.
    """
    Z_train, y_train = _as_training(Z_train, y_train)
    z0 = np.atleast_2d(np.asarray(z0, dtype=float))
    n = Z_train.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"k must lie in 1..{n}, got {k}")
    diff = z0[:, None, :] - Z_train[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    nn = np.argsort(dist, axis=1, kind="stable")[:, :k]
    votes = y_train[nn]
    classes = np.unique(y_train)
    if set(classes.tolist()) <= {0, 1}:
        return np.where(votes.mean(axis=1) <= 0.5, 0, 1)
    counts = (votes[:, :, None] == classes[None, None, :]).sum(axis=1)
    return classes[np.argmax(counts, axis=1)]


class KnnHead(Head):
    def __init__(self, k=20):
        if k < 1:
            raise ParameterError(f"k must be >= 1, got {k}")
        self.k = int(k)
        self.name = f"knn:{self.k}"
        self.classes_ = None

    def fit(self, Z, y):
        Z, y = _as_training(Z, y)
        if self.k > Z.shape[0]:
            raise ParameterError(f"k = {self.k} exceeds the training size {Z.shape[0]}")
        self.Z_, self.y_ = Z, y
        self.classes_ = np.unique(y)
        return self

    def predict(self, Z0):
        Z0 = self._check(Z0)
        return knn_predict(self.Z_, self.y_, Z0, self.k)

    def state(self):
        return {"Z": self.Z_, "y": self.y_}

    @classmethod
    def from_state(cls, k, state):
        head = cls(k)
        head.Z_ = state["Z"]
        head.y_ = state["y"].astype(int)
        head.classes_ = np.unique(head.y_)
        return head


# ---------------------------------------------------------------------------
# linear discriminant analysis


class LdaHead(Head):
    """Gaussian discriminant with a pooled covariance and empirical priors."""

    name = "lda"

    def __init__(self):
        self.classes_ = None

    def fit(self, Z, y):
        Z, y = _as_training(Z, y)
        classes = np.unique(y)
        if len(classes) < 2:
            raise StateError("LDA needs at least two classes")
        n, d = Z.shape
        means = np.array([Z[y == c].mean(axis=0) for c in classes])
        resid = Z - means[np.searchsorted(classes, y)]
        cov = resid.T @ resid / max(n - len(classes), 1)
        cov = (cov + cov.T) / 2.0
        evals = np.linalg.eigvalsh(cov)
        tr = float(np.trace(cov))
        if evals[0] <= 1e-12 * max(tr, 1e-300):
            warnings.warn("singular pooled covariance; adding a ridge", RuntimeWarning, stacklevel=2)
            cov = cov + (1e-8 * tr / d if tr > 0 else 1.0) * np.eye(d)
        self.classes_ = classes
        self.means_ = means
        self.cov_ = cov
        self.priors_ = np.array([np.mean(y == c) for c in classes])
        self._prepare()
        return self

    def _prepare(self):
        self.coef_ = np.linalg.solve(self.cov_, self.means_.T).T
        self.intercept_ = -0.5 * np.sum(self.coef_ * self.means_, axis=1) + np.log(self.priors_)

    def scores(self, Z0):
        Z0 = self._check(Z0)
        return Z0 @ self.coef_.T + self.intercept_

    def predict(self, Z0):
        # argmax returns the first maximum, i.e. the smallest label on ties
        return self.classes_[np.argmax(self.scores(Z0), axis=1)]

    def state(self):
        return {"classes": self.classes_, "means": self.means_, "cov": self.cov_, "priors": self.priors_}

    @classmethod
    def from_state(cls, state):
        head = cls()
        head.classes_ = state["classes"].astype(int)
        head.means_ = np.atleast_2d(state["means"])
        head.cov_ = np.atleast_2d(state["cov"])
        head.priors_ = state["priors"]
        head._prepare()
        return head


# ---------------------------------------------------------------------------
# linear soft-margin SVM


@numba.njit(cache=True)
def _pegasos_one(Xs, lam, iterations):
    n, p = Xs.shape
    w = np.zeros(p)
    step = np.zeros(p)
    best_w = w.copy()
    best_obj = 1.0
    radius2 = 1.0 / lam
    for t in range(1, iterations + 2):
        obj = 0.0
        step[:] = 0.0
        for i in range(n):
            margin = 0.0
            for j in range(p):
                margin += Xs[i, j] * w[j]
            slack = 1.0 - margin
            if slack > 0.0:
                obj += slack
                for j in range(p):
                    step[j] += Xs[i, j]
        obj = obj / n + 0.5 * lam * np.dot(w, w)
        if obj < best_obj:
            best_obj = obj
            best_w[:] = w
        if t > iterations:
            break
        # w <- w - (lam w - mean over active of s x) / (lam t)
        shrink = 1.0 - 1.0 / t
        gain = 1.0 / (lam * t * n)
        for j in range(p):
            w[j] = shrink * w[j] + gain * step[j]
        norm2 = np.dot(w, w)
        if norm2 > radius2:
            w *= np.sqrt(radius2 / norm2)
    return best_w


def _pegasos(X, s, lam, iterations):
    """Full-batch projected subgradient descent on lam/2 |w|^2 + mean hinge.

    ``X`` (..., n, p) already carries a constant column for the bias and ``s``
    (..., n) holds +-1 targets; leading axes index independent problems.
    Step size 1/(lam t); iterates are projected onto the ball of radius
    1/sqrt(lam), which contains the optimum. The best iterate is kept.
    """
    X = np.asarray(X, dtype=float)
    lead, (n, p) = X.shape[:-2], X.shape[-2:]
    Xs = (X * np.asarray(s, dtype=float)[..., :, None]).reshape(-1, n, p)
    out = np.array([_pegasos_one(np.ascontiguousarray(x), float(lam), int(iterations)) for x in Xs])
    return out.reshape(lead + (p,))


def _augment(Z, center, scale):
    return np.concatenate([(Z - center) / scale, np.ones(Z.shape[:-1] + (1,))], axis=-1)


class SvmHead(Head):
    """Linear soft-margin SVM, one-vs-rest for more than two classes.

    ``cost`` is the weight of the L2 penalty in the objective
    ``cost/2 |w|^2 + mean hinge``; features are standardised first and the bias
    enters as an extra constant feature.
    """

    iterations = 10_000

    def __init__(self, cost=0.01):
        if not cost > 0:
            raise ParameterError(f"cost must be positive, got {cost}")
        self.cost = float(cost)
        self.name = f"svm:{self.cost:g}"
        self.classes_ = None

    def fit(self, Z, y):
        Z, y = _as_training(Z, y)
        classes = np.unique(y)
        if len(classes) < 2:
            raise StateError("SVM needs both classes in the training labels")
        self.center_ = Z.mean(axis=0)
        scale = Z.std(axis=0)
        self.scale_ = np.where(scale > 0, scale, 1.0)
        X = _augment(Z, self.center_, self.scale_)
        targets = classes[1:] if len(classes) == 2 else classes
        S = np.stack([np.where(y == c, 1.0, -1.0) for c in targets])
        self.weights_ = _pegasos(np.broadcast_to(X, (len(targets),) + X.shape), S, self.cost, self.iterations)
        self.classes_ = classes
        return self

    def scores(self, Z0):
        Z0 = self._check(Z0)
        return _augment(Z0, self.center_, self.scale_) @ self.weights_.T

    def predict(self, Z0):
        s = self.scores(Z0)
        if len(self.classes_) == 2:
            return np.where(s[:, 0] > 0, self.classes_[1], self.classes_[0])
        return self.classes_[np.argmax(s, axis=1)]

    def state(self):
        return {"classes": self.classes_, "center": self.center_, "scale": self.scale_, "weights": self.weights_}

    @classmethod
    def from_state(cls, cost, state):
        head = cls(cost)
        head.classes_ = state["classes"].astype(int)
        head.center_ = np.atleast_1d(state["center"])
        head.scale_ = np.atleast_1d(state["scale"])
        head.weights_ = np.atleast_2d(state["weights"])
        return head


def make_head(spec) -> Head:
    """Build a head from ``"knn:20"``, ``"lda"`` or ``"svm:0.01"``."""
    if isinstance(spec, Head):
        return spec
    kind, _, arg = str(spec).strip().lower().partition(":")
    if kind == "knn":
        return KnnHead(int(arg) if arg else 20)
    if kind == "lda":
        return LdaHead()
    if kind == "svm":
        return SvmHead(float(arg) if arg else 0.01)
    raise ParameterError(f"unknown classifier head {spec!r}")
