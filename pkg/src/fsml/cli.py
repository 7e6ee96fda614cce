"""Command-line interface: ``fsml <command> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, csvio
from .benchmark import DEFAULT_HEADS, TEST_SIZE, benchmark_run
from .embedding import classical_mds, penalized_proximity
from .errors import FsmlError, ParameterError
from .fda import pairwise_l2
from .geometry import estimate_intrinsic_dim
from .pipeline import FitConfig, compute_geometry, fit, load, prepare, save
from .report import RunReport, export_xi_sweep
from .synth import SynthSpec, generate

logger = logging.getLogger("fsml")


def _auto(cast):
    def parse(text):
        return None if str(text).lower() == "auto" else cast(text)

    parse.__name__ = cast.__name__
    return parse


def _floats(text):
    try:
        return tuple(float(x) for x in str(text).replace(";", ",").split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_grid(p):
    g = p.add_argument_group("evaluation grid")
    g.add_argument("--grid-min", type=float, default=0.0)
    g.add_argument("--grid-max", type=float, default=1.0)
    g.add_argument("--grid-points", type=int, default=101)


def _add_model_options(p, xi_default="auto"):
    g = p.add_argument_group("model")
    g.add_argument("--xi", type=_auto(float), default=xi_default, help="label penalty, or 'auto' for CV")
    g.add_argument("--sqrt-xi-grid", type=_floats, help="CV grid of sqrt(xi) values")
    g.add_argument("--hreg", type=_auto(float), default="auto", help="coordinate-map bandwidth or 'auto'")
    g.add_argument("--h-grid", type=_floats, help="CV grid of h_reg values")
    g.add_argument("--d", type=_auto(int), default="auto", help="embedding dimension or 'auto'")
    g.add_argument("--kpca", type=int, default=15)
    g.add_argument("--kgraph", type=int, help="graph neighbours (default min(5, kpca))")
    g.add_argument("--head", default="knn:20", help="knn:K, lda or svm:COST")
    g.add_argument("--folds", type=int, default=10)
    g.add_argument("--no-stratify", action="store_true", help="plain random CV folds")
    g.add_argument("--kernel", default="gaussian", choices=("gaussian", "epanechnikov"))
    g.add_argument("--bandwidth", type=_auto(float), default="auto", help="presmoothing bandwidth")
    g.add_argument("--bandwidth-method", default="plugin", choices=("plugin", "cv"))
    g.add_argument("--seed", type=int, default=0)
    _add_grid(p)


def _config(args):
    return FitConfig(
        grid_min=args.grid_min, grid_max=args.grid_max, grid_points=args.grid_points,
        kernel=args.kernel, bandwidth=args.bandwidth, bandwidth_method=args.bandwidth_method,
        k_pca=args.kpca, k_graph=args.kgraph, d=args.d, xi=args.xi, h_reg=args.hreg, head=args.head,
        folds=args.folds, sqrt_xi_grid=args.sqrt_xi_grid, h_grid=args.h_grid,
        stratify=not args.no_stratify, seed=args.seed,
    )


def _read_training(args):
    curves = csvio.read_curves(args.curves)
    ids, labels = csvio.read_labels(args.labels, [c.id for c in curves])
    return curves, ids, labels


def _dump_dim(args, data, ids):
    if getattr(args, "dump_dim_diagnostics", None):
        est = estimate_intrinsic_dim(dist=pairwise_l2(data.values, data.weights))
        csvio.write_dim_diagnostics(args.dump_dim_diagnostics, ids, est)
        logger.info("intrinsic dimension %d (raw %.3f)", est.dimension, est.raw)


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args):
    data = generate(SynthSpec(args.model, args.n, args.J, not args.no_noise, args.seed))
    curves = data.sampled_curves()
    csvio.write_curves(args.out, curves)
    ids = [c.id for c in curves]
    if args.labels:
        csvio.write_labels(args.labels, ids, data.labels)
    if args.truth:
        header = ["curve_id"] + [f"latent{k + 1}" for k in range(data.latent.shape[1])]
        csvio.write_table(args.truth, header, [[cid, *map(float, row)] for cid, row in zip(ids, data.latent)])
    return 0


def cmd_fit(args):
    config = _config(args)
    curves, ids, labels = _read_training(args)
    distances = None
    if args.distances_in:
        dist_ids, distances = csvio.read_distance_matrix(args.distances_in)
        if list(dist_ids) != list(ids):
            raise ParameterError("distance matrix ids do not match the curve file")
    if args.dump_dim_diagnostics:
        _dump_dim(args, prepare(curves, labels, config), ids)
    model = fit(curves, labels, config, distances)
    logger.info("k_pca = %d; a common starting point is n^(2/(d+2)) = %.1f",
                config.k_pca, len(labels) ** (2.0 / (model.d + 2)))
    save(model, args.model)
    if args.distances_out:
        csvio.write_distance_matrix(args.distances_out, ids, model.distances)
    print(RunReport.from_model(model).format(), end="")
    return 0


def cmd_predict(args):
    model = load(args.model)
    curves = csvio.read_curves(args.curves)
    ids = [c.id for c in curves]
    Z = model.embed(curves)
    pred = model.head.predict(Z)
    scores = model.head.scores(Z) if args.scores else None
    csvio.write_predictions(args.out, ids, pred, scores, list(model.head.classes_))
    if args.coords_out:
        csvio.write_coordinates(args.coords_out, ids, Z)
    return 0


def cmd_embed(args):
    config = _config(args)
    curves, ids, labels = _read_training(args)
    data = prepare(curves, labels, config)
    _dump_dim(args, data, ids)
    geom = compute_geometry(data, config)
    xi = 0.0 if config.xi is None else config.xi
    emb = classical_mds(penalized_proximity(geom.distances, data.labels, xi), geom.d)
    side = csvio.write_embedding(args.out, ids, emb, data.labels, xi)
    if args.distances_out:
        csvio.write_distance_matrix(args.distances_out, ids, geom.distances)
    print(f"wrote {args.out} and {side}")
    return 0


def _synthetic_config(args):
    cfg = FitConfig(k_pca=args.kpca, k_graph=args.kgraph, folds=args.folds,
                    grid_min=args.grid_min, grid_max=args.grid_max, grid_points=args.grid_points)
    if args.d is not None:
        cfg = replace(cfg, d=args.d)
    return cfg


def cmd_benchmark(args):
    res = benchmark_run(args.model, args.n, args.J, tuple(args.heads.split(",")), args.reps, args.seed,
                        _synthetic_config(args), args.jobs, args.test_size)
    print(res.format_table(), end="")
    if args.out:
        Path(args.out).write_text(res.to_csv())
    if args.reps_out:
        Path(args.reps_out).write_text(res.reps_csv())
    return 0


def cmd_sweep_xi(args):
    if args.model:
        sweep = export_xi_sweep(args.model, args.sqrt_xi, args.head, args.reps, args.seed,
                                _synthetic_config(args), n=args.n, J=args.J, jobs=args.jobs, path=args.out)
    else:
        if not (args.curves and args.labels):
            raise ParameterError("sweep-xi needs --model or both --curves and --labels")
        curves, _, labels = _read_training(args)
        sweep = export_xi_sweep(curves, args.sqrt_xi, args.head, args.reps, args.seed,
                                _synthetic_config(args), labels=labels, path=args.out)
    print(sweep.to_csv(), end="")
    return 0


def cmd_report(args):
    model = load(args.model)
    print(RunReport.from_model(model).format(), end="")
    if args.cv_out and model.cv is not None:
        csvio.write_cv(args.cv_out, model.cv, model.head.spec)
    if args.embedding_out:
        csvio.write_embedding(args.embedding_out, model.ids, model.embedding, model.labels, model.xi)
    return 0


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="fsml", description="Supervised manifold learning for functional data.")
    parser.add_argument("--version", action="version", version=f"fsml {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw curves from a synthetic model")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--J", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-noise", action="store_true")
    p.add_argument("--out", required=True, help="curves CSV")
    p.add_argument("--labels", help="labels CSV")
    p.add_argument("--truth", help="latent variables CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a classifier and save a model bundle")
    p.add_argument("--curves", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--model", required=True, help="output bundle directory")
    p.add_argument("--distances-in", help="reuse a saved geodesic distance matrix")
    p.add_argument("--distances-out", help="write the geodesic distance matrix")
    p.add_argument("--dump-dim-diagnostics", metavar="CSV", help="per-curve TWO-NN ratios")
    _add_model_options(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="label new curves with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--curves", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scores", action="store_true", help="add per-class scores (lda, svm)")
    p.add_argument("--coords-out", help="write the interpolated embedding coordinates")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("embed", help="penalised embedding of labelled curves")
    p.add_argument("--curves", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--distances-out")
    p.add_argument("--dump-dim-diagnostics", metavar="CSV")
    _add_model_options(p, xi_default="0")
    p.set_defaults(func=cmd_embed)

    for name, func, help_ in (("benchmark", cmd_benchmark, "repeated train/test runs on a synthetic model"),
                              ("sweep-xi", cmd_sweep_xi, "error versus fixed sqrt(xi)")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--model", required=(name == "benchmark"))
        p.add_argument("--n", type=int, default=200)
        p.add_argument("--J", type=int, default=50)
        p.add_argument("--reps", type=int, default=20 if name == "benchmark" else 10)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--d", type=int)
        p.add_argument("--kpca", type=int, default=15)
        p.add_argument("--kgraph", type=int)
        p.add_argument("--folds", type=int, default=10)
        p.add_argument("--out", help="summary CSV")
        _add_grid(p)
        if name == "benchmark":
            p.add_argument("--heads", default=",".join(DEFAULT_HEADS))
            p.add_argument("--test-size", type=int, default=TEST_SIZE)
            p.add_argument("--reps-out", help="per-rep CSV")
        else:
            p.add_argument("--sqrt-xi", type=_floats, required=True, help="comma-separated sqrt(xi) grid")
            p.add_argument("--head", default="knn:20")
            p.add_argument("--curves")
            p.add_argument("--labels")
        p.set_defaults(func=func)

    p = sub.add_parser("report", help="summarise a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--cv-out", help="per-fold CV CSV")
    p.add_argument("--embedding-out", help="embedding CSV (sidecar report written next to it)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (FsmlError, OSError) as exc:
        print(f"fsml: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
