"""Command line interface: fit, predict, explain, evaluate, approx-study."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

import numpy as np
import pandas as pd

from .baselines import kfrnn_predict, knn_predict
from .classifier import FgacModel, FitConfig, OwaPredictionConfig, explain, fit, predict_class
from .connectives import TripletSpec
from .data import DataError, Preprocessor, _resolve, load_csv, oversample, preprocess
from .evaluation import EvalConfig, approx_study, cross_validate
from .persistence import load_model, save_model
from .relations import SimilarityConfig
from .solver import Loss, SolverError

log = logging.getLogger("fgac")


def _floats(text: str):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _grid(text: str):
    out = []
    for v in text.split(","):
        v = v.strip()
        if v == "all":
            out.append(None)
        elif v:
            out.append(int(v) if v.lstrip("-").isdigit() else float(v))
    return tuple(out)


def _data_args(p, target=True):
    p.add_argument("--data", required=True, help="CSV file or bundled dataset name")
    if target:
        p.add_argument("--target", default=None, help="class column (default: last column)")
    p.add_argument("--nominal", default="", help="comma-separated columns to treat as nominal")


def _load(args):
    nominal = [c for c in args.nominal.split(",") if c]
    return load_csv(args.data, getattr(args, "target", None), nominal)


def cmd_fit(args) -> int:
    data = _load(args)
    pre = preprocess(data)
    table = pre.transform(data.frame)
    y = data.target
    if args.oversample:
        rows = oversample(y, args.seed)
        table, y = table.take(rows), y[rows]
    sim = SimilarityConfig(gamma=args.gamma, kind=args.similarity, q_count=pre.q_count)
    cfg = FitConfig(sim, TripletSpec(args.phi_exponent), Loss.parse(args.loss), args.nn, args.binary_path)
    model = fit(table, y, cfg, classes=data.classes, preprocessing=pre.to_dict())
    save_model(model, args.out)
    s = model.stats
    print(f"fitted {len(model)} instances, {model.n_classes} classes; objective {s['objective']:.6g}, "
          f"residual {s['feasibility_residual']:.2e}, {s.get('seconds', 0):.2f}s -> {args.out}")
    return 0


def _queries(model, args):
    if model.preprocessing is None:
        raise DataError("model carries no preprocessing statistics")
    pre = Preprocessor.from_dict(model.preprocessing)
    nominal = [c for c in args.nominal.split(",") if c] or list(pre.nominal)
    frame = pd.read_csv(_resolve(args.data), dtype=str, keep_default_na=False, skipinitialspace=True)
    frame.columns = [c.strip() for c in frame.columns]
    frame = frame.apply(lambda s: s.str.strip())
    for c in nominal:
        if c not in pre.nominal:
            log.warning("column %s was not nominal at fit time", c)
    return pre.transform(frame)


def _predict_any(model, queries, owa):
    if isinstance(model, FgacModel):
        return predict_class(model, queries, owa)
    if hasattr(model, "k"):
        pred = knn_predict(model, queries)
        return pred, np.eye(len(model.classes))[pred]
    return kfrnn_predict(model, queries)


def cmd_predict(args) -> int:
    model = load_model(args.model)
    queries = _queries(model, args)
    owa = OwaPredictionConfig.parse(args.owa) if args.owa else None
    if owa is not None and isinstance(model, FgacModel) and not model.triplet.is_identity:
        log.warning("OWA duality is only guaranteed for the standard negator; duality checks skipped")
    pred, deg = _predict_any(model, queries, owa)
    out = open(args.out, "w", newline="") if args.out != "-" else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(["id"] + [f"degree_{c}" for c in model.classes] + ["decision"])
        for i, (row, p) in enumerate(zip(deg, pred)):
            w.writerow([i] + [repr(float(v)) for v in row] + [model.classes[p]])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _class_index(model, text):
    if text in [str(c) for c in model.classes]:
        return [str(c) for c in model.classes].index(text)
    try:
        k = int(text)
    except ValueError:
        raise DataError(f"unknown class {text!r}; classes are {list(model.classes)}") from None
    if not 0 <= k < len(model.classes):
        raise DataError(f"class index {k} out of range")
    return k


def cmd_explain(args) -> int:
    model = load_model(args.model)
    if not isinstance(model, FgacModel):
        raise DataError("explain needs an fgac model")
    queries = _queries(model, args)
    if not 0 <= args.row < len(queries):
        raise DataError(f"row {args.row} out of range (0..{len(queries) - 1})")
    k = _class_index(model, args.cls)
    report = explain(model, queries.take([args.row]), k, args.top, query_id=args.row)
    print(report.to_text(model.classes))
    doc = json.dumps(report.to_dict(), indent=2)
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(doc)
    else:
        print(doc)
    return 0


def cmd_evaluate(args) -> int:
    data = _load(args)
    kwargs = dict(family=args.model_family, folds=args.folds, seed=args.seed, nested=args.nested,
                  loss=Loss.parse(args.loss), similarity=args.similarity, nn=args.nn,
                  oversample=not args.no_oversample, triplet=TripletSpec(args.phi_exponent),
                  gamma=args.gamma)
    if args.grid:
        kwargs["grid"] = _grid(args.grid)
    if args.owa:
        kwargs["owa"] = OwaPredictionConfig.parse(args.owa)
    res = cross_validate(data, EvalConfig(**kwargs))
    print(f"{data.name}: {res.family} balanced accuracy {res.mean:.4f} "
          f"(folds {', '.join(f'{s:.4f}' for s in res.fold_scores)}); best {res.best}; {res.seconds:.1f}s")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(res.to_dict(), fh, indent=2)
    return 0


def cmd_approx(args) -> int:
    data = _load(args)
    rows = approx_study(data, _floats(args.gamma), _floats(args.nn), args.loss.split(","),
                        args.similarity.split(","), TripletSpec(args.phi_exponent), args.repeats)
    out = open(args.out, "w", newline="") if args.out and args.out != "-" else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(["similarity", "loss", "gamma", "nn", "difference", "seconds", "time_ratio",
                    "objective", "constraints"])
        for r in rows:
            w.writerow([r.similarity, r.loss, r.gamma, r.nn, repr(r.difference), f"{r.seconds:.6f}",
                        f"{r.time_ratio:.6f}", repr(r.objective), r.constraints])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for every random choice")
    common.add_argument("-v", "--verbose", action="store_true")
    ap = argparse.ArgumentParser(prog="fgac", description="Fuzzy granular approximation classifier")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="fit a model on a CSV file")
    _data_args(p)
    p.add_argument("--loss", default="mse", help="mae, mse or quantile:p")
    p.add_argument("--similarity", default="euclidean", choices=("euclidean", "supremum"))
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--nn", type=float, default=1.0)
    p.add_argument("--phi-exponent", type=float, default=1.0)
    p.add_argument("--binary-path", action="store_true", help="dedicated two-class formulation")
    p.add_argument("--oversample", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", parents=[common], help="predict degrees and classes")
    p.add_argument("--model", required=True)
    _data_args(p, target=False)
    p.add_argument("--owa", default=None, help="scheme[:k] for OWA-softened bounds")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("explain", parents=[common], help="arguments for and against a class")
    p.add_argument("--model", required=True)
    _data_args(p, target=False)
    p.add_argument("--row", type=int, required=True)
    p.add_argument("--class", dest="cls", required=True, help="class name or index")
    p.add_argument("--top", type=int, default=5)
    p.add_argument("--json", default=None, help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("evaluate", parents=[common], help="cross-validated balanced accuracy")
    _data_args(p)
    p.add_argument("--model-family", default="fgac", choices=("fgac", "knn", "kfrnn"))
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--grid", default=None, help="comma-separated hyperparameter values")
    p.add_argument("--loss", default="mse")
    p.add_argument("--similarity", default="euclidean", choices=("euclidean", "supremum"))
    p.add_argument("--gamma", type=float, default=1.0, help="fixed gamma for kfrnn")
    p.add_argument("--nn", type=float, default=1.0)
    p.add_argument("--phi-exponent", type=float, default=1.0)
    p.add_argument("--owa", default=None)
    p.add_argument("--nested", action="store_true")
    p.add_argument("--no-oversample", action="store_true")
    p.add_argument("--out", default=None, help="JSON result file")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("approx-study", parents=[common], help="nn reduction accuracy and timing")
    _data_args(p)
    p.add_argument("--nn", default="0.02,0.05,0.1,0.2,0.5,1")
    p.add_argument("--gamma", default="1")
    p.add_argument("--loss", default="mse")
    p.add_argument("--similarity", default="euclidean")
    p.add_argument("--phi-exponent", type=float, default=1.0)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_approx)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (DataError, SolverError, ValueError, IndexError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
