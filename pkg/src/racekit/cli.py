"""Command-line frontend: reproducible sketch pipelines with batch output.

Every run resolves its flags into a manifest (JSON) that suffices to re-run
the command exactly; the manifest lands next to ``--output`` or on stderr
when results go to stdout. Results are CSV. Exit codes: 0 success, 2 usage
or invalid parameters, 3 data and parse errors, 4 contract violations
(frozen sketch, double release, incompatible merge).
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
import time

import numpy as np

from . import __version__, estimation, io as rio, ml, privacy, sketch as rsketch
from .errors import (
    CsvError,
    DimensionMismatchError,
    DoubleReleaseError,
    FrozenSketchError,
    IncompatibleSketchError,
    InsufficientRowsError,
    InvalidParameterError,
    RaceError,
    SketchFormatError,
    ZeroVectorError,
)
from .lsh import LshFamily, new_family
from .optimize import OptimizerConfig

_USAGE_ERRORS = (InvalidParameterError, InsufficientRowsError)
_DATA_ERRORS = (CsvError, DimensionMismatchError, ZeroVectorError,
                SketchFormatError, OSError)
_CONTRACT_ERRORS = (FrozenSketchError, DoubleReleaseError, IncompatibleSketchError)


def _family_from_args(args, dim: int) -> LshFamily:
    return new_family(args.lsh, dim=dim, depth=args.depth, width=args.range,
                      bandwidth=args.bandwidth if args.lsh == "euclidean" else None,
                      seed=args.seed)


def _emit_manifest(args, command: str, extra: dict | None = None) -> None:
    record = {"command": command, "racekit_version": __version__}
    skip = {"func"}
    record.update({k: v for k, v in sorted(vars(args).items()) if k not in skip})
    if extra:
        record.update(extra)
    path = getattr(args, "manifest", None)
    if path is None:
        out = getattr(args, "output", None)
        if out and out != "-":
            path = str(out) + ".manifest.json"
    text = json.dumps(record, sort_keys=True, default=str)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text, file=sys.stderr)


@contextlib.contextmanager
def _open_out(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w") as fh:
            yield fh


def _load_queries(args) -> np.ndarray:
    ds = rio.load_csv(args.queries, header=args.header, delimiter=args.delimiter)
    pts = ds.points
    if getattr(args, "transform", None):
        with open(args.transform) as fh:
            rec = json.load(fh)
        transform = rio.Transform(
            mode=rec["mode"],
            mins=np.array(rec["mins"]) if rec.get("mins") is not None else None,
            maxs=np.array(rec["maxs"]) if rec.get("maxs") is not None else None)
        pts = rio.apply_transform(transform, pts)
    return pts


def _write_transform(dataset: rio.Dataset, path: str) -> str | None:
    if dataset.transform.mode == "none":
        return None
    rec = {"mode": dataset.transform.mode,
           "mins": None if dataset.transform.mins is None else dataset.transform.mins.tolist(),
           "maxs": None if dataset.transform.maxs is None else dataset.transform.maxs.tolist()}
    tpath = str(path) + ".transform.json"
    with open(tpath, "w") as fh:
        json.dump(rec, fh)
    return tpath


def cmd_build(args) -> int:
    ds = rio.load_csv(args.input, header=args.header, delimiter=args.delimiter)
    if len(ds) == 0:
        raise CsvError(f"{args.input} contains no data rows")
    ds = rio.scale(ds, args.scale)
    family = _family_from_args(args, ds.dim)
    sk = rsketch.build(ds, family, args.rows, threads=args.threads)
    rsketch.save(sk, args.output)
    tpath = _write_transform(ds, args.output)
    _emit_manifest(args, "build", {"n_points": len(ds), "transform_file": tpath})
    return 0


def cmd_info(args) -> int:
    sk = rsketch.load(args.sketch)
    fam = sk.family
    lines = [("rows", sk.rows), ("range", sk.width), ("kind", fam.kind.value),
             ("dim", fam.dim), ("depth", fam.depth), ("bandwidth", fam.bandwidth),
             ("seed", fam.seed), ("privatized", sk.privatized)]
    if sk.privatized:
        lines.append(("epsilon", sk.epsilon))
    else:
        lines.append(("inserted", sk.inserted))
    lines.append(("bytes", len(rsketch.serialize(sk))))
    for key, value in lines:
        print(f"{key}: {value}")
    return 0


def cmd_privatize(args) -> int:
    sk = rsketch.load(args.sketch)
    if args.budget and os.path.exists(args.budget):
        with open(args.budget) as fh:
            state = json.load(fh)
        if state.get("consumed"):
            raise DoubleReleaseError(f"budget file {args.budget} is already consumed")
        if state.get("epsilon") != args.epsilon:
            raise InvalidParameterError(
                f"budget file epsilon {state.get('epsilon')} != --epsilon {args.epsilon}")
    budget = privacy.PrivacyBudget(args.epsilon)
    released = privacy.privatize(sk, budget, rng_seed=args.seed)
    rsketch.save(released, args.output)
    if args.budget:
        with open(args.budget, "w") as fh:
            json.dump({"epsilon": args.epsilon, "consumed": True}, fh)
    _emit_manifest(args, "privatize",
                   {"deterministic_seed": args.seed is not None})
    return 0


def cmd_merge(args) -> int:
    sketches = [rsketch.load(p) for p in args.inputs]
    merged = sketches[0]
    for part in sketches[1:]:
        merged = rsketch.merge(merged, part)
    rsketch.save(merged, args.output)
    _emit_manifest(args, "merge", {"n_inputs": len(sketches)})
    return 0


def cmd_query(args) -> int:
    sk = rsketch.load(args.sketch)
    pts = _load_queries(args)
    estimator = "median_of_means" if args.estimator == "mom" else "mean"
    estimates = estimation.query_many(sk, pts, estimator, args.delta)
    with _open_out(args.output) as out:
        out.write("query_id,f_hat,n_hat,kde\n")
        for i, est in enumerate(estimates):
            out.write(f"{i},{est.f_hat:.17g},{est.n_hat:.17g},{est.kde:.17g}\n")
    _emit_manifest(args, "query", {"n_queries": len(estimates)})
    return 0


def cmd_classify_train(args) -> int:
    ds = rio.load_csv(args.input, header=args.header, delimiter=args.delimiter,
                      label_column=args.label_col)
    if len(ds) == 0:
        raise CsvError(f"{args.input} contains no data rows")
    ds = rio.scale(ds, args.scale)
    labels = ds.labels
    classes = sorted(set(float(v) for v in labels))
    per_class = [(c, ds.points[labels == c]) for c in classes]
    family = _family_from_args(args, ds.dim)
    clf = ml.train_classifier(per_class, family, args.rows, args.epsilon,
                              seed=args.seed)
    ml.save_classifier(clf, args.output)
    tpath = _write_transform(ds, os.path.join(args.output, "scaling"))
    args.manifest = args.manifest or os.path.join(args.output, "manifest.json")
    _emit_manifest(args, "classify-train",
                   {"classes": classes, "n_points": len(ds), "transform_file": tpath})
    return 0


def cmd_classify_predict(args) -> int:
    clf = ml.load_classifier(args.model)
    if args.transform is None:
        default_transform = os.path.join(args.model, "scaling.transform.json")
        if os.path.exists(default_transform):
            args.transform = default_transform
    pts = _load_queries(args)
    kdes = clf.score_matrix(pts, rule="ml", delta=args.delta)
    scores = kdes if args.rule == "ml" else clf.score_matrix(pts, rule="map",
                                                             delta=args.delta)
    winners = np.argmax(scores, axis=0)
    with _open_out(args.output) as out:
        names = ",".join(f"kde_{c}" for c in clf.classes)
        out.write(f"query_id,label,{names}\n")
        for i in range(pts.shape[0]):
            vals = ",".join(f"{kdes[j, i]:.17g}" for j in range(len(clf.classes)))
            out.write(f"{i},{clf.classes[winners[i]]},{vals}\n")
    _emit_manifest(args, "classify-predict", {"n_queries": int(pts.shape[0])})
    return 0


def cmd_regress(args) -> int:
    ds = rio.load_csv(args.input, header=args.header, delimiter=args.delimiter,
                      label_column=args.target_col)
    if len(ds) == 0:
        raise CsvError(f"{args.input} contains no data rows")
    config = OptimizerConfig(max_iters=args.max_iters, initial_step=args.step,
                             restarts=args.restarts)
    model = ml.fit_regression(ds.points, ds.labels, depth=args.depth,
                              rows=args.rows, width=args.range,
                              epsilon=args.epsilon, config=config, seed=args.seed)
    ml.save_regression(model, args.output)
    for j, coef in enumerate(model.theta):
        print(f"theta_{j},{coef:.17g}")
    print(f"intercept,{model.intercept:.17g}")
    _emit_manifest(args, "regress", {"final_loss": model.trace[-1]})
    return 0


def cmd_mode(args) -> int:
    sk = rsketch.load(args.sketch)
    init = np.array([float(v) for v in args.init.split(",")])
    config = OptimizerConfig(max_iters=args.max_iters, initial_step=args.step,
                             restarts=args.restarts)
    point = ml.find_mode(sk, init, config, delta=args.delta)
    with _open_out(args.output) as out:
        out.write(",".join(f"{v:.17g}" for v in point) + "\n")
    _emit_manifest(args, "mode", {})
    return 0


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(args.seed)
    rows_out = []
    prev = None
    for n in sizes:
        data = rng.standard_normal((n, args.dim))
        family = _family_from_args(args, args.dim)
        rsketch.build(data[:2000], family, args.rows)  # warm caches
        t0 = time.perf_counter()
        sk = rsketch.build(data, family, args.rows)
        build_s = time.perf_counter() - t0
        queries = rng.standard_normal((args.queries, args.dim))
        t0 = time.perf_counter()
        estimation.query_many(sk, queries, "median_of_means", 0.1)
        query_s = (time.perf_counter() - t0) / max(args.queries, 1)
        ratio = build_s / prev if prev else float("nan")
        prev = build_s
        rows_out.append((n, args.dim, args.rows, args.range, args.depth,
                         build_s, query_s, ratio))
    with _open_out(args.output) as out:
        out.write("n,dim,rows,range,depth,build_seconds,query_seconds,ratio_vs_prev\n")
        for row in rows_out:
            out.write(",".join(f"{v:.6g}" if isinstance(v, float) else str(v)
                               for v in row) + "\n")
    _emit_manifest(args, "bench", {})
    return 0


def _add_csv_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--header", action="store_true",
                   help="first CSV line is a header row")
    p.add_argument("--delimiter", default=",")


def _add_family_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lsh", choices=["srp", "euclidean"], default="srp")
    p.add_argument("--depth", type=int, default=4,
                   help="elementary hashes concatenated per row")
    p.add_argument("--bandwidth", type=float, default=1.0,
                   help="bucket width for the euclidean family")
    p.add_argument("--rows", type=int, default=1000)
    p.add_argument("--range", type=int, default=500,
                   help="buckets per row")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="racekit",
        description="Differentially private RACE sketches over CSV data")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="one-pass sketch construction from CSV")
    p.add_argument("--input", required=True)
    _add_family_flags(p)
    p.add_argument("--scale", choices=["none", "sphere", "cube"], default="none")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--output", required=True)
    p.add_argument("--manifest")
    _add_csv_flags(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("info", help="print sketch header fields")
    p.add_argument("--sketch", required=True)
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("privatize", help="one-shot Laplace release of a clean sketch")
    p.add_argument("--sketch", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--seed", type=int, default=None,
                   help="deterministic noise seed (TEST ONLY, not private)")
    p.add_argument("--budget", help="budget state file enforcing one-shot release")
    p.add_argument("--output", required=True)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_privatize)

    p = sub.add_parser("merge", help="sum clean sketches built with one family")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("query", help="kernel-sum and density estimates for query points")
    p.add_argument("--sketch", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--estimator", choices=["mean", "mom"], default="mom")
    p.add_argument("--transform", help="transform JSON written by build --scale")
    p.add_argument("--output", default="-")
    p.add_argument("--manifest")
    _add_csv_flags(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("classify-train", help="train a per-class density classifier")
    p.add_argument("--input", required=True)
    p.add_argument("--label-col", type=int, required=True)
    _add_family_flags(p)
    p.add_argument("--scale", choices=["none", "sphere", "cube"], default="none")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True, help="model directory")
    p.add_argument("--manifest")
    _add_csv_flags(p)
    p.set_defaults(func=cmd_classify_train)

    p = sub.add_parser("classify-predict", help="label queries with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--rule", choices=["ml", "map"], default="ml")
    p.add_argument("--transform")
    p.add_argument("--output", default="-")
    p.add_argument("--manifest")
    _add_csv_flags(p)
    p.set_defaults(func=cmd_classify_predict)

    p = sub.add_parser("regress", help="fit linear weights via the sketched surrogate loss")
    p.add_argument("--input", required=True)
    p.add_argument("--target-col", type=int, default=-1)
    _add_family_flags(p)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=400)
    p.add_argument("--step", type=float, default=0.5)
    p.add_argument("--restarts", type=int, default=2)
    p.add_argument("--output", required=True, help="model JSON path")
    p.add_argument("--manifest")
    _add_csv_flags(p)
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("mode", help="derivative-free density ascent from an init point")
    p.add_argument("--sketch", required=True)
    p.add_argument("--init", required=True, help="comma-separated start point")
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--max-iters", type=int, default=400)
    p.add_argument("--step", type=float, default=0.5)
    p.add_argument("--restarts", type=int, default=2)
    p.add_argument("--output", default="-")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_mode)

    p = sub.add_parser("bench", help="build/query timing sweep over dataset sizes")
    p.add_argument("--sizes", default="100000,200000",
                   help="comma-separated point counts")
    p.add_argument("--dim", type=int, default=10)
    _add_family_flags(p)
    p.add_argument("--queries", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default="-")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _CONTRACT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except RaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
