"""Curve containers, L2 quadrature and ridged local-linear presmoothing.

All curves of one dataset share a single uniform evaluation grid. L2 inner
products are trapezoid sums on that grid, so every geometric quantity used
downstream reduces to weighted dot products of value vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    DegenerateFitError,
    GridMismatchError,
    InsufficientDataError,
    ParameterError,
)

DEFAULT_GRID_POINTS = 101
MIN_GRID_POINTS = 16


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class Kernel:
    """A symmetric probability density on the real line.

    ``roughness`` is R(K) = int K^2 and ``second_moment`` is int u^2 K(u) du;
    both enter the plug-in bandwidth constant.
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    roughness: float
    second_moment: float
    support: Optional[float] = None

    def __call__(self, u):
        return self.func(np.asarray(u, dtype=float))

    @property
    def plugin_constant(self):
        return (self.roughness / self.second_moment**2) ** 0.2


def _gaussian(u):
    return np.exp(-0.5 * u * u) / np.sqrt(2.0 * np.pi)


def _epanechnikov(u):
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


GAUSSIAN = Kernel("gaussian", _gaussian, 1.0 / (2.0 * np.sqrt(np.pi)), 1.0)
EPANECHNIKOV = Kernel("epanechnikov", _epanechnikov, 0.6, 0.2, support=1.0)

KERNELS = {k.name: k for k in (GAUSSIAN, EPANECHNIKOV)}


def get_kernel(kernel) -> Kernel:
    if isinstance(kernel, Kernel):
        return kernel
    try:
        return KERNELS[str(kernel).lower()]
    except KeyError:
        raise ParameterError(
            f"unknown kernel {kernel!r}; choose from {sorted(KERNELS)}"
        ) from None


# ---------------------------------------------------------------------------
# containers


def uniform_grid(a=0.0, b=1.0, points=DEFAULT_GRID_POINTS):
    if points < MIN_GRID_POINTS:
        raise ParameterError(f"grid needs at least {MIN_GRID_POINTS} points, got {points}")
    if not b > a:
        raise ParameterError(f"empty grid interval [{a}, {b}]")
    return np.linspace(float(a), float(b), int(points))


def trapezoid_weights(grid):
    """Quadrature weights w with sum(w * f) equal to the trapezoid rule for f."""
    grid = np.asarray(grid, dtype=float)
    dt = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += dt / 2.0
    w[1:] += dt / 2.0
    return w


@dataclass(frozen=True)
class SampledCurve:
    """Raw discrete and noisy observations of one subject."""

    id: str
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape:
            raise ParameterError(f"curve {self.id!r}: times and values must be 1-d of equal length")
        if len(times) < 2:
            raise InsufficientDataError(f"curve {self.id!r}: needs at least 2 observations")
        if np.any(np.diff(times) <= 0):
            raise ParameterError(f"curve {self.id!r}: times must be strictly increasing")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise ParameterError(f"curve {self.id!r}: non-finite observation")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class Curve:
    """A smooth function stored by its values on a dense grid."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise ParameterError("grid and values must be 1-d of equal length")
        if len(grid) < MIN_GRID_POINTS:
            raise ParameterError(f"grid needs at least {MIN_GRID_POINTS} points")
        if not np.all(np.isfinite(values)):
            raise ParameterError("curve values must be finite")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __sub__(self, other):
        _check_grids(self, other)
        return Curve(self.grid, self.values - other.values)

    def __add__(self, other):
        _check_grids(self, other)
        return Curve(self.grid, self.values + other.values)


@dataclass(frozen=True)
class LabeledDataset:
    """n smoothed curves on one shared grid with integer class labels.

    Curves are stored row-wise in ``values`` (n x G) so geometric routines
    can work on the matrix directly.
    """

    grid: np.ndarray
    values: np.ndarray
    labels: np.ndarray
    class_count: int
    ids: tuple = ()

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        labels = np.asarray(self.labels, dtype=int)
        n = values.shape[0]
        if values.shape[1] != len(grid):
            raise GridMismatchError("curve values do not match the grid length")
        if n < 2:
            raise InsufficientDataError(f"a dataset needs at least 2 curves, got {n}")
        if labels.shape != (n,):
            raise ParameterError("one label per curve is required")
        if labels.min() < 0 or labels.max() >= self.class_count:
            raise ParameterError(f"labels must lie in 0..{self.class_count - 1}")
        if not np.all(np.isfinite(values)):
            raise ParameterError("curve values must be finite")
        ids = tuple(self.ids) if len(self.ids) else tuple(str(i) for i in range(n))
        if len(ids) != n:
            raise ParameterError("one id per curve is required")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "ids", ids)

    @classmethod
    def from_curves(cls, curves: Sequence[Curve], labels, class_count=None, ids=()):
        grid = curves[0].grid
        for c in curves[1:]:
            _check_grids(curves[0], c)
        labels = np.asarray(labels, dtype=int)
        if class_count is None:
            class_count = int(labels.max()) + 1
        return cls(grid, np.vstack([c.values for c in curves]), labels, class_count, ids)

    def __len__(self):
        return self.values.shape[0]

    @property
    def weights(self):
        return trapezoid_weights(self.grid)

    def curve(self, i) -> Curve:
        return Curve(self.grid, self.values[i])

    def subset(self, idx):
        idx = np.asarray(idx)
        return LabeledDataset(
            self.grid, self.values[idx], self.labels[idx], self.class_count,
            tuple(self.ids[i] for i in idx),
        )


def _check_grids(f, g):
    if f.grid is g.grid:
        return
    if f.grid.shape != g.grid.shape or not np.array_equal(f.grid, g.grid):
        raise GridMismatchError("curves live on different grids")


# ---------------------------------------------------------------------------
# L2 geometry


def trapezoid_inner_product(f: Curve, g: Curve) -> float:
    _check_grids(f, g)
    # sum of products of the two factors in fixed order keeps the result symmetric
    prod = f.values * g.values
    return float(np.sum(trapezoid_weights(f.grid) * prod))


def l2_norm(f: Curve) -> float:
    return float(np.sqrt(max(trapezoid_inner_product(f, f), 0.0)))


def l2_distance(f: Curve, g: Curve) -> float:
    _check_grids(f, g)
    diff = f.values - g.values
    return float(np.sqrt(np.sum(trapezoid_weights(f.grid) * diff * diff)))


def pairwise_l2(values, weights, other=None):
    """Matrix of L2 distances between the rows of ``values`` (and ``other``).

    Differences are formed explicitly rather than through a Gram expansion so
    near-duplicate curves keep full relative precision.
    """
    A = np.asarray(values, dtype=float)
    B = A if other is None else np.asarray(other, dtype=float)
    out = np.empty((A.shape[0], B.shape[0]))
    for i in range(A.shape[0]):
        diff = B - A[i]
        out[i] = np.sqrt((diff * diff) @ weights)
    if other is None:
        # enforce exact symmetry and zero diagonal
        out = np.minimum(out, out.T)
        np.fill_diagonal(out, 0.0)
    return out


# ---------------------------------------------------------------------------
# smoothing


def local_linear_fit(times, values, grid, kernel=GAUSSIAN, h=None, ridge=None):
    """Ridged local-linear estimate of a curve at every grid point.

    Works on raw arrays and therefore accepts repeated time points, which the
    :class:`SampledCurve` container forbids.

    Parameters
    ----------
    times, values : array_like, shape (J,)
        Observation abscissae and noisy responses.
    grid : array_like, shape (G,)
        Evaluation points.
    kernel : Kernel or str
    h : float
        Bandwidth, strictly positive.
    ridge : float, optional
        Denominator ridge; defaults to ``J**-2``.

    Returns
    -------
    ndarray, shape (G,)
    """
    kernel = get_kernel(kernel)
    if h is None or not np.isfinite(h) or h <= 0:
        raise ParameterError(f"bandwidth must be positive, got {h!r}")
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    grid = np.asarray(grid, dtype=float)
    J = len(times)
    if ridge is None:
        ridge = J**-2.0
    if ridge < 0:
        raise ParameterError(f"ridge must be nonnegative, got {ridge}")

    u = (times[None, :] - grid[:, None]) / h
    k = kernel(u)
    ku = k * u
    s0 = k.sum(axis=1) / J
    s1 = ku.sum(axis=1) / J
    s2 = (ku * u).sum(axis=1) / J
    t0 = k @ values / J
    t1 = ku @ values / J

    empty = s0 <= 0.0
    if np.any(empty):
        t = grid[np.argmax(empty)]
        raise DegenerateFitError(
            f"all kernel weights vanish at grid point t={t:.6g} (bandwidth {h:.3g} too small)"
        )

    denom = s0 * s2 - s1 * s1
    small = np.abs(denom) < ridge
    # sign(0) is taken as +1 so an exactly singular design still gets the ridge
    sgn = np.where(denom < 0, -1.0, 1.0)
    denom = denom + ridge * sgn * small
    with np.errstate(divide="ignore", invalid="ignore"):
        est = (t0 * s2 - t1 * s1) / denom
    if not np.all(np.isfinite(est)):
        # only reachable with ridge == 0 and a singular local design
        bad = grid[np.argmax(~np.isfinite(est))]
        raise DegenerateFitError(f"singular local design at grid point t={bad:.6g}")
    return est


def ridged_local_linear_smooth(raw: SampledCurve, grid, kernel=GAUSSIAN, h=None, ridge=None) -> Curve:
    """Recover a smooth :class:`Curve` from one subject's raw observations.

    ``h=None`` uses :func:`plugin_bandwidth`.
    """
    kernel = get_kernel(kernel)
    if h is None:
        h = plugin_bandwidth(raw, kernel)
    return Curve(grid, local_linear_fit(raw.times, raw.values, grid, kernel, h, ridge))


def plugin_bandwidth(raw: SampledCurve, kernel=GAUSSIAN, domain=None) -> float:
    """Rule-of-thumb direct plug-in bandwidth for local-linear smoothing.

    A global quartic fit supplies both the curvature functional int (X'')^2
    and the residual variance. The result is clamped to
    ``[2 * max spacing, |domain| / 2]``.
    """
    kernel = get_kernel(kernel)
    t = raw.times
    y = raw.values
    J = len(t)
    if J < 5:
        raise InsufficientDataError(f"plug-in bandwidth needs at least 5 observations, got {J}")
    a, b = (t[0], t[-1]) if domain is None else domain
    span = float(b - a)
    lower = 2.0 * float(np.max(np.diff(t)))
    upper = span / 2.0
    if lower >= upper:
        return upper

    poly = np.polynomial.Polynomial.fit(t, y, 4, domain=[a, b])
    resid = y - poly(t)
    sigma2 = float(resid @ resid) / max(J - 5, 1)
    curv = poly.deriv(2) ** 2
    roughness = float(curv.integ()(b) - curv.integ()(a))
    scale_poly = poly**2
    scale = float(scale_poly.integ()(b) - scale_poly.integ()(a)) / span

    if roughness <= 1e-10 * max(scale, 1e-300):
        return upper
    h = kernel.plugin_constant * (sigma2 * span / (roughness * J)) ** 0.2
    return float(np.clip(h, lower, upper))


def cv_bandwidth(raw: SampledCurve, kernel=GAUSSIAN, candidates=None) -> float:
    """Leave-one-out cross-validated bandwidth, a fallback for the plug-in rule."""
    kernel = get_kernel(kernel)
    t, y = raw.times, raw.values
    J = len(t)
    if J < 5:
        raise InsufficientDataError(f"CV bandwidth needs at least 5 observations, got {J}")
    span = t[-1] - t[0]
    if candidates is None:
        candidates = np.geomspace(2.0 * np.max(np.diff(t)), span / 2.0, 20)
    best, best_loss = None, np.inf
    ridge = J**-2.0
    for h in candidates:
        u = (t[None, :] - t[:, None]) / h
        k = kernel(u)
        np.fill_diagonal(k, 0.0)
        ku = k * u
        s0, s1, s2 = k.sum(1), ku.sum(1), (ku * u).sum(1)
        t0, t1 = k @ y, ku @ y
        denom = (s0 * s2 - s1 * s1) / (J - 1) ** 2
        sgn = np.where(denom < 0, -1.0, 1.0)
        denom = denom + ridge * sgn * (np.abs(denom) < ridge)
        with np.errstate(divide="ignore", invalid="ignore"):
            pred = (t0 * s2 - t1 * s1) / (J - 1) ** 2 / denom
        if not np.all(np.isfinite(pred)):
            continue
        loss = float(np.mean((y - pred) ** 2))
        if loss < best_loss:
            best, best_loss = float(h), loss
    if best is None:
        raise DegenerateFitError("no candidate bandwidth gives a finite leave-one-out fit")
    return best


def smooth_all(raws: Sequence[SampledCurve], grid, kernel=GAUSSIAN, method="plugin", h=None):
    """Smooth every raw curve onto ``grid``; returns an (n, G) value matrix.

    ``h`` (a fixed bandwidth) overrides ``method``.
    """
    kernel = get_kernel(kernel)
    grid = np.asarray(grid, dtype=float)
    out = np.empty((len(raws), len(grid)))
    start, end = grid[0], grid[-1]
    for i, raw in enumerate(raws):
        if raw.times[0] < start or raw.times[-1] > end:
            raise ParameterError(
                f"curve {raw.id!r}: observation times [{raw.times[0]:.6g}, {raw.times[-1]:.6g}] "
                f"leave the grid domain [{start:.6g}, {end:.6g}]"
            )
        if h is not None:
            hi = h
        elif method == "plugin":
            hi = plugin_bandwidth(raw, kernel)
        elif method == "cv":
            hi = cv_bandwidth(raw, kernel)
        else:
            raise ParameterError(f"unknown bandwidth method {method!r}")
        out[i] = local_linear_fit(raw.times, raw.values, grid, kernel, hi)
    return out
