"""Run reports and plot-ready sweep tables; no rendering happens here."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .benchmark import sweep_run
from .classify import make_head
from .fda import LabeledDataset
from .pipeline import FitConfig, compute_geometry, prepare
from .tuning import CvPlan, default_h_grid, nested_cv_select


@dataclass
class RunReport:
    """Quantities of one fitted model, read straight off the model object."""

    timings: dict
    epsilon_mds: float
    negative_mass: float
    xi: float
    h_reg: float
    d: int
    head: str
    n: int
    cv_rows: list = field(default_factory=list)  # (xi, fold, misclassifications, h_inner)
    error_table: Optional[list] = None  # (head, mean, sd)

    def __post_init__(self):
        bad = [k for k, v in self.timings.items() if not v >= 0]
        if bad:
            raise ValueError(f"negative stage timing(s): {', '.join(bad)}")

    @classmethod
    def from_model(cls, model, error_table=None):
        cv_rows = model.cv.rows(model.head.spec) if model.cv is not None else []
        return cls(dict(model.timings), model.embedding.epsilon_mds, model.embedding.negative_mass,
                   model.xi, model.h_reg, model.d, model.head.spec, len(model.labels), cv_rows, error_table)

    def cv_losses(self):
        """Total misclassifications per xi, in grid order."""
        totals = {}
        for xi, _, miss, _ in self.cv_rows:
            totals[xi] = totals.get(xi, 0) + miss
        return totals

    def format(self):
        out = [
            f"training curves      {self.n}",
            f"head                 {self.head}",
            f"dimension d          {self.d}",
            f"xi                   {self.xi:.6g} (sqrt {np.sqrt(self.xi):.6g})",
            f"h_reg                {self.h_reg:.6g}",
            f"epsilon_mds          {self.epsilon_mds:.6g}",
            f"negative eig. mass   {self.negative_mass:.6g}",
        ]
        if self.timings:
            out.append("stage timings (s)")
            out += [f"  {k:<18} {v:.3f}" for k, v in self.timings.items()]
        losses = self.cv_losses()
        if losses:
            out.append("cross-validation: misclassified curves per xi")
            out.append(f"  {'sqrt(xi)':>10} {'xi':>12} {'errors':>7}")
            for xi, miss in losses.items():
                mark = "  <- chosen" if xi == self.xi else ""
                out.append(f"  {np.sqrt(xi):>10.4g} {xi:>12.6g} {miss:>7d}{mark}")
        if self.error_table:
            out.append("test misclassification %: mean (sd)")
            out += [f"  {h:<13} {m:.1f} ({s:.1f})" for h, m, s in self.error_table]
        return "\n".join(out) + "\n"


@dataclass
class XiSweep:
    sqrt_xi: tuple
    errors: np.ndarray  # (reps, len(sqrt_xi)) misclassification percentages
    head: str

    def rows(self):
        sd = self.errors.std(axis=0, ddof=1) if self.errors.shape[0] > 1 else np.zeros(len(self.sqrt_xi))
        return [(s, float(m), float(v)) for s, m, v in zip(self.sqrt_xi, self.errors.mean(axis=0), sd)]

    def to_csv(self):
        lines = ["sqrt_xi,mean_error,sd_error,reps"]
        lines += [f"{s!r},{m!r},{v!r},{self.errors.shape[0]}" for s, m, v in self.rows()]
        return "\n".join(lines) + "\n"


def _dataset_sweep(data, labels, grid, head, reps, seed, config):
    """CV misclassification (%) of a fixed-penalty fit, one fold seed per rep."""
    config = config or FitConfig()
    data = prepare(data, labels, config)
    geom = compute_geometry(data, config)
    h_grid = config.h_grid or default_h_grid(dist=geom.dist_l2, k_pca=config.k_pca)
    spec = make_head(head).spec
    errors = np.zeros((reps, len(grid)))
    for r in range(reps):
        for k, s in enumerate(grid):
            plan = CvPlan(config.folds, (s * s,), tuple(sorted(h_grid)), config.seed + r, config.stratify)
            cv = nested_cv_select(data.values, data.weights, data.labels, geom.distances, plan, (spec,),
                                  config.k_pca, geom.d, config.kernel, config.ridge)
            errors[r, k] = 100.0 * float(cv.cv_loss(spec)[0]) / len(data)
    return errors


def export_xi_sweep(dataset, sqrt_xi_grid, head="knn:20", reps=10, seed=0, config=None, labels=None,
                    n=200, J=50, jobs=1, path=None) -> XiSweep:
    """Mean and sd misclassification at each fixed penalty.

    ``dataset`` is either a synthetic model id, in which case every rep draws
    a fresh training and test sample and reports test error, or observed data
    (a :class:`LabeledDataset`, smoothed values or raw curves with ``labels``),
    in which case every rep reruns the cross-validation with a new fold seed.
    The bandwidth is always chosen by the inner search.
    """
    grid = tuple(float(s) for s in sqrt_xi_grid)
    if not grid:
        raise ValueError("the sqrt(xi) grid must be nonempty")
    if any(s < 0 for s in grid):
        raise ValueError("sqrt(xi) values must be nonnegative")
    if isinstance(dataset, str):
        errors = sweep_run(dataset, grid, head, n, J, reps, seed, config, jobs)
    else:
        cfg = replace(config or FitConfig(), seed=seed)
        lab = labels if labels is not None or not isinstance(dataset, LabeledDataset) else dataset.labels
        errors = _dataset_sweep(dataset, lab, grid, head, reps, seed, cfg)
    sweep = XiSweep(grid, errors, make_head(head).spec)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(sweep.to_csv())
    return sweep
