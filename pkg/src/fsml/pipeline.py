"""End-to-end fitting, prediction and persistence of the functional classifier."""

from __future__ import annotations

import contextlib
import logging
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .classify import Head, KnnHead, LdaHead, SvmHead, make_head
from .embedding import Embedding, classical_mds, penalized_proximity
from .errors import (
    BundleError,
    FsmlError,
    IncompatibleBundleError,
    InsufficientDataError,
    ParameterError,
    StageError,
)
from .fda import (
    LabeledDataset,
    SampledCurve,
    get_kernel,
    pairwise_l2,
    smooth_all,
    trapezoid_weights,
    uniform_grid,
)
from .geometry import (
    all_tangent_frames,
    build_graph,
    estimate_intrinsic_dim,
    geodesic_distance_matrix,
)
from .interpolate import CoordinateMapModel
from .tuning import CvPlan, CvResult, default_h_grid, default_xi_grid, nested_cv_select

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
DEFAULT_K_GRAPH = 5


@dataclass
class FitConfig:
    """Settings for :func:`fit`; ``None`` means "choose from the data"."""

    grid_min: float = 0.0
    grid_max: float = 1.0
    grid_points: int = 101
    kernel: str = "gaussian"
    bandwidth: Optional[float] = None  # presmoothing bandwidth; None -> per-curve selector
    bandwidth_method: str = "plugin"  # or "cv"
    k_pca: int = 15
    k_graph: Optional[int] = None  # None -> min(DEFAULT_K_GRAPH, k_pca)
    d: Optional[int] = None
    xi: Optional[float] = None
    h_reg: Optional[float] = None
    head: str = "knn:20"
    folds: int = 10
    sqrt_xi_grid: Optional[tuple] = None
    h_grid: Optional[tuple] = None
    stratify: bool = True
    seed: int = 0
    ridge: Optional[float] = None  # lambda_n of the coordinate map; None -> n^-3

    @property
    def grid(self):
        return uniform_grid(self.grid_min, self.grid_max, self.grid_points)

    @property
    def graph_k(self):
        return self.k_graph if self.k_graph is not None else min(DEFAULT_K_GRAPH, self.k_pca)


@dataclass
class FsmlModel:
    """A fitted classifier: everything needed to embed and label new curves."""

    config: FitConfig
    grid: np.ndarray
    train: np.ndarray  # (n, G) smoothed training curves
    labels: np.ndarray
    ids: tuple
    class_count: int
    d: int
    xi: float
    h_reg: float
    embedding: Embedding
    head: Head
    ridge: float
    distances: Optional[np.ndarray] = None
    dim_estimate: Optional[float] = None
    cv: Optional[CvResult] = None
    timings: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @property
    def weights(self):
        return trapezoid_weights(self.grid)

    @property
    def coordinate_map(self):
        return CoordinateMapModel(self.train, self.weights, self.embedding.coords, self.h_reg,
                                  self.config.k_pca, self.config.kernel, self.ridge)

    def smooth(self, raws):
        return smooth_all(raws, self.grid, self.config.kernel, self.config.bandwidth_method, self.config.bandwidth)

    def _as_values(self, curves):
        if isinstance(curves, SampledCurve):
            return self.smooth([curves])
        if isinstance(curves, (list, tuple)) and curves and isinstance(curves[0], SampledCurve):
            return self.smooth(curves)
        if isinstance(curves, LabeledDataset):
            vals = curves.values
            grid = curves.grid
        else:
            vals = np.atleast_2d(np.asarray(getattr(curves, "values", curves), dtype=float))
            grid = getattr(curves, "grid", self.grid)
        if vals.shape[1] != len(self.grid) or not np.array_equal(grid, self.grid):
            raise ParameterError("query curves must live on the model grid")
        return vals

    def embed(self, curves):
        """Coordinate-map estimates (q, d) for raw or smoothed query curves."""
        return self.coordinate_map.predict(self._as_values(curves))

    def predict(self, curves):
        return self.head.predict(self.embed(curves))

    def scores(self, curves):
        return self.head.scores(self.embed(curves))


@contextlib.contextmanager
def _stage(name, timings):
    start = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except FsmlError as exc:
        raise StageError(name, exc) from exc
    finally:
        timings[name] = time.perf_counter() - start


def prepare(curves, labels=None, config: FitConfig = None, timings=None):
    """Smooth raw input (if needed) and return a :class:`LabeledDataset`."""
    config = config or FitConfig()
    timings = {} if timings is None else timings
    if isinstance(curves, LabeledDataset):
        return curves
    with _stage("smooth", timings):
        if len(curves) < 2:
            raise InsufficientDataError(f"need at least 2 training curves, got {len(curves)}")
        grid = config.grid
        if isinstance(curves[0], SampledCurve):
            values = smooth_all(curves, grid, config.kernel, config.bandwidth_method, config.bandwidth)
            ids = tuple(c.id for c in curves)
        else:
            values = np.asarray(curves, dtype=float)
            ids = ()
        labels = np.asarray(labels, dtype=int)
        return LabeledDataset(grid, values, labels, int(labels.max()) + 1, ids)


@dataclass
class Geometry:
    """Stage outputs shared by every fit on one training sample."""

    dist_l2: np.ndarray
    d: int
    dim_estimate: Optional[float]
    distances: np.ndarray


def compute_geometry(data: LabeledDataset, config: FitConfig, timings=None, distances=None) -> Geometry:
    timings = {} if timings is None else timings
    X, w = data.values, data.weights
    with _stage("pairwise", timings):
        dl2 = pairwise_l2(X, w)
    d, est = config.d, None
    if d is None:
        with _stage("dimension", timings):
            res = estimate_intrinsic_dim(dist=dl2)
            d, est = res.dimension, res.raw
    if distances is None:
        with _stage("graph", timings):
            graph = build_graph(X, w, config.graph_k, dl2)
        with _stage("frames", timings):
            frames = all_tangent_frames(X, w, config.k_pca, d, dl2)
        with _stage("geodesics", timings):
            distances = geodesic_distance_matrix(X, w, graph, frames).matrix
    distances = np.asarray(getattr(distances, "matrix", distances), dtype=float)
    if distances.shape != (len(data), len(data)):
        raise StageError("geodesics", ParameterError("distance matrix does not match the sample size"))
    return Geometry(dl2, d, est, distances)


def cv_plan(config: FitConfig, geom: Geometry) -> CvPlan:
    if config.sqrt_xi_grid is not None:
        xi_grid = tuple(sorted(float(s) ** 2 for s in config.sqrt_xi_grid))
    elif config.xi is not None:
        xi_grid = (float(config.xi),)
    else:
        xi_grid = default_xi_grid(geom.distances)
    if config.h_grid is not None:
        h_grid = tuple(sorted(float(h) for h in config.h_grid))
    elif config.h_reg is not None:
        h_grid = (float(config.h_reg),)
    else:
        h_grid = default_h_grid(dist=geom.dist_l2, k_pca=config.k_pca)
    return CvPlan(config.folds, xi_grid, h_grid, config.seed, config.stratify)


def finish(data: LabeledDataset, config: FitConfig, geom: Geometry, xi, h_reg, head=None, cv=None,
           timings=None) -> FsmlModel:
    """Embed with the chosen penalty and train the head on the embedding."""
    timings = {} if timings is None else timings
    head = make_head(head or config.head)
    with _stage("embedding", timings):
        emb = classical_mds(penalized_proximity(geom.distances, data.labels, xi), geom.d)
    with _stage("head", timings):
        head.fit(emb.coords, data.labels)
    ridge = config.ridge if config.ridge is not None else float(len(data)) ** -3
    provenance = {
        "fsml_version": __version__,
        "format_version": FORMAT_VERSION,
        "seed": config.seed,
        "k_graph": config.graph_k,
    }
    if cv is not None:
        provenance["xi_grid"] = ";".join(repr(x) for x in cv.plan.xi_grid)
        provenance["h_grid"] = ";".join(repr(h) for h in cv.plan.h_grid)
    return FsmlModel(config, data.grid, data.values, data.labels, data.ids, data.class_count, geom.d,
                     float(xi), float(h_reg), emb, head, ridge, geom.distances, geom.dim_estimate, cv,
                     timings, provenance)


def fit(curves, labels=None, config: FitConfig = None, distances=None) -> FsmlModel:
    """Fit the full chain: smooth, geometry, penalised MDS, coordinate map, head.

    ``curves`` may be raw :class:`SampledCurve` objects, an (n, G) array of
    smoothed values on ``config.grid`` or a :class:`LabeledDataset`.
    ``distances`` resumes from a saved geodesic distance matrix.
    """
    config = config or FitConfig()
    get_kernel(config.kernel)
    timings = {}
    data = prepare(curves, labels, config, timings)
    geom = compute_geometry(data, config, timings, distances)
    cv = None
    xi, h_reg = config.xi, config.h_reg
    if xi is None or h_reg is None:
        with _stage("tuning", timings):
            plan = cv_plan(config, geom)
            cv = nested_cv_select(data.values, data.weights, data.labels, geom.distances, plan,
                                  (config.head,), config.k_pca, geom.d, config.kernel, config.ridge)
            xi_cv, h_cv = cv.selected()
            xi = xi_cv if xi is None else xi
            h_reg = h_cv if h_reg is None else h_reg
    return finish(data, config, geom, xi, h_reg, cv=cv, timings=timings)


def fsml_predict(model: FsmlModel, curves):
    return model.predict(curves)


# ---------------------------------------------------------------------------
# persistence

_FLOAT = "%.17g"


def _write_matrix(path, arr):
    arr = np.asarray(arr, dtype=float)
    np.savetxt(path, arr.reshape(arr.shape[0], -1) if arr.ndim > 1 else arr[:, None], fmt=_FLOAT, delimiter=",")


def _read_matrix(path, shape, section):
    if not path.exists():
        raise BundleError(f"model bundle is missing section '{section}' ({path.name})")
    try:
        arr = np.loadtxt(path, delimiter=",", ndmin=2)
        return arr.reshape(shape)
    except ValueError as exc:
        raise BundleError(f"model bundle section '{section}' is corrupt: {exc}") from exc


def save(model: FsmlModel, path):
    """Write a directory bundle: CSV matrices plus a key=value manifest."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    arrays = {
        "grid": model.grid,
        "train": model.train,
        "labels": model.labels,
        "coords": model.embedding.coords,
        "eigenvalues": model.embedding.eigenvalues,
    }
    if model.distances is not None:
        arrays["distances"] = model.distances
    if model.cv is not None:
        cv = model.cv
        arrays["cv_folds"] = cv.folds
        arrays["cv_h_inner"] = cv.h_inner
        arrays["cv_inner_loss"] = cv.inner_loss
        for k, spec in enumerate(cv.heads):
            arrays[f"cv_miss_{k}"] = cv.misclassified[spec]
    for key, arr in model.head.state().items():
        arrays[f"head_{key}"] = arr
    manifest = {
        "format_version": FORMAT_VERSION,
        "fsml_version": __version__,
        "n": len(model.labels),
        "class_count": model.class_count,
        "d": model.d,
        "xi": repr(model.xi),
        "h_reg": repr(model.h_reg),
        "ridge": repr(model.ridge),
        "head": model.head.spec,
        "epsilon_mds": repr(model.embedding.epsilon_mds),
        "negative_mass": repr(model.embedding.negative_mass),
        "dim_estimate": repr(model.dim_estimate),
        "ids": "\t".join(model.ids),
    }
    for f in fields(FitConfig):
        manifest[f"config.{f.name}"] = repr(getattr(model.config, f.name))
    for key, val in model.timings.items():
        manifest[f"timing.{key}"] = repr(val)
    for key, val in model.provenance.items():
        manifest[f"provenance.{key}"] = val
    for key, arr in arrays.items():
        _write_matrix(root / f"{key}.csv", arr)
        manifest[f"section.{key}"] = "x".join(str(s) for s in np.shape(arr))
    if model.cv is not None:
        plan = model.cv.plan
        manifest["cv.heads"] = "\t".join(model.cv.heads)
        manifest["cv.folds"] = plan.folds
        manifest["cv.xi_grid"] = repr(plan.xi_grid)
        manifest["cv.h_grid"] = repr(plan.h_grid)
        manifest["cv.seed"] = repr(plan.seed)
        manifest["cv.stratify"] = repr(plan.stratify)
        with open(root / "cv.csv", "w") as fh:
            fh.write("xi,fold,misclassifications,h_inner\n")
            for xi, fold, miss, h in model.cv.rows():
                fh.write(f"{xi!r},{fold},{miss},{h!r}\n")
    with open(root / "manifest.txt", "w") as fh:
        for key, val in manifest.items():
            fh.write(f"{key}={val}\n")
    return root


def read_manifest(path):
    mf = Path(path) / "manifest.txt"
    if not mf.exists():
        raise BundleError(f"model bundle is missing section 'manifest' ({mf})")
    out = {}
    for line in mf.read_text().splitlines():
        if not line.strip():
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise BundleError(f"malformed manifest line: {line!r}")
        out[key] = val
    return out


def _literal(text):
    import ast

    return ast.literal_eval(text)


def load(path) -> FsmlModel:
    root = Path(path)
    mf = read_manifest(root)
    try:
        version = int(mf["format_version"])
    except (KeyError, ValueError):
        raise BundleError("model bundle manifest lacks a format_version") from None
    if version > FORMAT_VERSION:
        raise IncompatibleBundleError(
            f"bundle format version {version} is newer than supported version {FORMAT_VERSION}"
        )
    if version < 1:
        raise IncompatibleBundleError(f"unknown bundle format version {version}")

    def shape(key):
        if f"section.{key}" not in mf:
            raise BundleError(f"model bundle is missing section '{key}'")
        return tuple(int(s) for s in mf[f"section.{key}"].split("x"))

    def arr(key):
        return _read_matrix(root / f"{key}.csv", shape(key), key)

    try:
        cfg = FitConfig(**{f.name: _literal(mf[f"config.{f.name}"]) for f in fields(FitConfig)})
        head_spec = mf["head"]
        xi, h_reg, ridge = float(mf["xi"]), float(mf["h_reg"]), float(mf["ridge"])
        d = int(mf["d"])
        ids = tuple(mf["ids"].split("\t")) if mf["ids"] else ()
    except KeyError as exc:
        raise BundleError(f"model bundle manifest is missing key {exc}") from None

    state = {k[len("section.head_"):]: arr(k[len("section."):]) for k in mf if k.startswith("section.head_")}
    head = make_head(head_spec)
    if isinstance(head, KnnHead):
        head = KnnHead.from_state(head.k, state)
    elif isinstance(head, LdaHead):
        head = LdaHead.from_state(state)
    else:
        head = SvmHead.from_state(head.cost, state)

    emb = Embedding(arr("coords"), arr("eigenvalues"), float(mf["epsilon_mds"]), float(mf["negative_mass"]))
    distances = arr("distances") if "section.distances" in mf else None
    dim_est = _literal(mf.get("dim_estimate", "None"))
    labels = arr("labels").astype(int)
    cv = None
    if "cv.heads" in mf:
        try:
            plan = CvPlan(int(mf["cv.folds"]), _literal(mf["cv.xi_grid"]), _literal(mf["cv.h_grid"]),
                          _literal(mf["cv.seed"]), _literal(mf["cv.stratify"]))
            heads = tuple(mf["cv.heads"].split("\t"))
        except (KeyError, ValueError, SyntaxError) as exc:
            raise BundleError(f"model bundle has a malformed cv section: {exc}") from None
        miss = {spec: arr(f"cv_miss_{k}").astype(int) for k, spec in enumerate(heads)}
        cv = CvResult(plan, heads, miss, arr("cv_h_inner"), arr("cv_inner_loss"),
                      arr("cv_folds").astype(int))
    timings = {k[len("timing."):]: float(v) for k, v in mf.items() if k.startswith("timing.")}
    provenance = {k[len("provenance."):]: v for k, v in mf.items() if k.startswith("provenance.")}
    return FsmlModel(cfg, arr("grid"), arr("train"), labels, ids, int(mf["class_count"]), d, xi, h_reg,
                     emb, head, ridge, distances, dim_est, cv, timings, provenance)
