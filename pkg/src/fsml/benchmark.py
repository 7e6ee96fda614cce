"""Simulation benchmark: repeated train/test runs on the synthetic models."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from threadpoolctl import threadpool_limits

from .classify import make_head
from .fda import smooth_all
from .pipeline import FitConfig, compute_geometry, cv_plan, finish, prepare
from .synth import TRUE_DIMENSION, SynthSpec, generate
from .tuning import nested_cv_select

logger = logging.getLogger(__name__)

DEFAULT_HEADS = ("knn:20", "svm:0.01", "lda")
TEST_SIZE = 500


@dataclass
class RepResult:
    rep: int
    errors: dict  # head -> misclassification percentage
    selected: dict  # head -> (xi, h_reg)
    d: int


@dataclass
class BenchmarkResult:
    model: str
    n: int
    J: int
    heads: tuple
    reps: list

    def errors(self, head):
        return np.array([r.errors[head] for r in self.reps])

    def summary(self, head):
        e = self.errors(head)
        sd = float(e.std(ddof=1)) if len(e) > 1 else 0.0
        return float(e.mean()), sd

    def table_rows(self):
        return [(h, *self.summary(h)) for h in self.heads]

    def to_csv(self):
        lines = ["model,n,J,head,mean_error,sd_error,reps"]
        for h, mean, sd in self.table_rows():
            lines.append(f"{self.model},{self.n},{self.J},{h},{mean:.6f},{sd:.6f},{len(self.reps)}")
        return "\n".join(lines) + "\n"

    def reps_csv(self):
        lines = ["rep,head,error,xi,h_reg,d"]
        for r in self.reps:
            for h in self.heads:
                xi, hr = r.selected[h]
                lines.append(f"{r.rep},{h},{r.errors[h]!r},{xi!r},{hr!r},{r.d}")
        return "\n".join(lines) + "\n"

    def format_table(self):
        out = [f"model ({self.model}), n={self.n}, J={self.J}, reps={len(self.reps)}",
               "head          mean (sd) misclassification %"]
        for h, mean, sd in self.table_rows():
            out.append(f"{h:<13} {mean:.1f} ({sd:.1f})")
        return "\n".join(out) + "\n"


def rep_seeds(seed, rep):
    """Train and test seeds of one repetition, derived from ``seed + rep``."""
    return (seed + rep, 0), (seed + rep, 1)


def base_config(model, config=None):
    config = config or FitConfig()
    if config.d is None and model in TRUE_DIMENSION and model != "v":
        config = replace(config, d=TRUE_DIMENSION[model])
    return config


def run_rep(model, n, J, heads, seed, rep, config=None, test_size=TEST_SIZE, fixed_xi=None) -> RepResult:
    """One train/test repetition evaluating every head.

    ``fixed_xi`` pins the penalty (the bandwidth is still chosen by the inner
    CV); otherwise both are chosen by nested CV, separately per head.
    """
    config = base_config(model, config)
    train_seed, test_seed = rep_seeds(seed, rep)
    train = generate(SynthSpec(model, n, J, True, train_seed))
    test = generate(SynthSpec(model, test_size, J, True, test_seed))
    cfg = replace(config, seed=seed + rep)
    if fixed_xi is not None:
        cfg = replace(cfg, xi=None, sqrt_xi_grid=(float(np.sqrt(fixed_xi)),))
    data = prepare(train.sampled_curves(), train.labels, cfg)
    geom = compute_geometry(data, cfg)
    Xt = smooth_all(test.sampled_curves(), cfg.grid, cfg.kernel, cfg.bandwidth_method, cfg.bandwidth)
    errors, selected = _evaluate(data, geom, cfg, heads, Xt, test.labels, rep)
    return RepResult(rep, errors, selected, geom.d)


def _evaluate(data, geom, cfg, heads, Xt, yt, rep):
    """Nested CV on the training sample, then test error of each head's choice."""
    plan = cv_plan(cfg, geom)
    cv = nested_cv_select(data.values, data.weights, data.labels, geom.distances, plan, heads,
                          cfg.k_pca, geom.d, cfg.kernel, cfg.ridge)
    errors, selected = {}, {}
    for head in cv.heads:
        xi, h = cv.selected(head)
        fitted = finish(data, cfg, geom, xi, h, head=head, cv=cv)
        mu, ok, _ = fitted.coordinate_map.predict_partial(Xt)
        pred = np.full(len(Xt), -1)
        if np.any(ok):
            pred[ok] = fitted.head.predict(mu[ok])
        if not np.all(ok):
            logger.warning("rep %d: %d test curves outside interpolation support", rep, int(np.sum(~ok)))
        errors[head] = 100.0 * float(np.mean(pred != yt))
        selected[head] = (xi, h)
    return errors, selected


def sweep_rep(model, n, J, head, seed, rep, sqrt_xi_grid, config=None, test_size=TEST_SIZE):
    """Test error (%) of one repetition at every fixed penalty in ``sqrt_xi_grid``.

    The sample, its geometry and the smoothed test set are shared by all grid
    values; only the inner bandwidth search and the fit are redone.
    """
    config = base_config(model, config)
    train_seed, test_seed = rep_seeds(seed, rep)
    train = generate(SynthSpec(model, n, J, True, train_seed))
    test = generate(SynthSpec(model, test_size, J, True, test_seed))
    cfg = replace(config, seed=seed + rep, xi=None)
    data = prepare(train.sampled_curves(), train.labels, cfg)
    geom = compute_geometry(data, cfg)
    Xt = smooth_all(test.sampled_curves(), cfg.grid, cfg.kernel, cfg.bandwidth_method, cfg.bandwidth)
    out = []
    for s in sqrt_xi_grid:
        errors, _ = _evaluate(data, geom, replace(cfg, sqrt_xi_grid=(float(s),)), (head,), Xt, test.labels, rep)
        out.append(errors[make_head(head).spec])
    return out


def _run_rep_args(args):
    # a single BLAS thread per rep keeps reductions in a fixed order, so the
    # output does not depend on the machine's thread count
    with threadpool_limits(1):
        return run_rep(*args)


def _sweep_rep_args(args):
    with threadpool_limits(1):
        return sweep_rep(*args)


def _map(func, tasks, jobs):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            return list(pool.map(func, tasks))
    return [func(t) for t in tasks]


def benchmark_run(model, n=200, J=50, heads=DEFAULT_HEADS, reps=20, seed=0, config=None, jobs=1,
                  test_size=TEST_SIZE, fixed_xi=None) -> BenchmarkResult:
    """Mean (sd) test misclassification over ``reps`` independent repetitions."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    model = SynthSpec(model, 2).model
    tasks = [(model, n, J, tuple(heads), seed, r, config, test_size, fixed_xi) for r in range(reps)]
    results = _map(_run_rep_args, tasks, jobs)
    return BenchmarkResult(model, n, J, tuple(heads), results)


def sweep_run(model, sqrt_xi_grid, head="knn:20", n=200, J=50, reps=10, seed=0, config=None, jobs=1,
              test_size=TEST_SIZE):
    """(reps, len(grid)) test errors in percent for fixed penalties on a synthetic model."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    model = SynthSpec(model, 2).model
    grid = tuple(float(s) for s in sqrt_xi_grid)
    tasks = [(model, n, J, head, seed, r, grid, config, test_size) for r in range(reps)]
    return np.array(_map(_sweep_rep_args, tasks, jobs), dtype=float).reshape(reps, len(grid))
