"""Command-line surface.

Data files are row-per-sample CSVs (transposed internally to the
column-per-sample convention); label and series files are single-column
CSVs.  Every randomized command prints the seed it used, outputs are written
atomically, and identical invocations produce byte-identical files apart
from the ``created_at`` provenance timestamp.

Run ``relulasso <command> --help`` for per-command flags.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import dataio
from .arrangements import enumerate_exact, pattern_of, sample_patterns
from .baseline import TrainConfig, train_sgd
from .core import (
    ConvergenceError,
    PatternSet,
    RegularizationConvention,
    ScaleLimitError,
    ShapeError,
    balance_rescale,
    predict,
)
from .reconstruct import reconstruct_net
from .solver import (
    build_problem,
    certify,
    fitted_values,
    reg_path,
    solve,
)
from .univariate import solve_univariate
from .wedge import train_wedge_lasso

_DEFAULT_TOL = 1e-6


def _default_budget(n: int, d: int) -> int:
    return min(5000, 10 * n * d)


def _pattern_report(X, args):
    """Exact or sampled patterns per the flags, echoing the choices made."""
    exact_feasible = X.d <= 2 or X.n <= 16
    use_exact = args.exact or (args.samples is None and exact_feasible)
    if use_exact:
        report = enumerate_exact(X)
        print(f"patterns: {len(report.patterns)} (exact, bound {report.bound:.6g})")
        return report
    count = args.samples if args.samples is not None else _default_budget(X.n, X.d)
    seed = args.seed
    report = sample_patterns(X, count, seed)
    print(f"patterns: {len(report.patterns)} (sampled, budget {count}, seed {seed})")
    return report


def _add_pattern_flags(p):
    group = p.add_mutually_exclusive_group()
    group.add_argument("--exact", action="store_true",
                       help="enumerate all patterns (d <= 2 at any n, else n <= 16)")
    group.add_argument("--samples", type=int, default=None,
                       help="sample this many weight draws (default min(5000, 10*n*d))")
    p.add_argument("--seed", type=int, default=0, help="sampling seed (default 0)")


def _load_xy(args):
    X = dataio.ingest_csv(args.data)
    y = dataio.read_labels_csv(args.labels)
    if y.n != X.n:
        raise ShapeError(f"{args.labels} has {y.n} labels for {X.n} samples")
    return X, y


def _mse(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.mean((a - b) ** 2))


def cmd_arrangements(args) -> int:
    X = dataio.ingest_csv(args.data)
    report = _pattern_report(X, args)
    dataio.atomic_write_text(args.out, json.dumps(report.patterns.to_json_dict()) + "\n")
    print(f"wrote {args.out}")
    return 0


def cmd_train(args) -> int:
    X, y = _load_xy(args)
    report = _pattern_report(X, args)
    if len(report.patterns) == 0:
        raise ValueError("no patterns found; increase the sample budget")
    problem = build_problem(X, y, args.beta, report.patterns, report.witnesses)
    solution = solve(problem, tol=args.tol)
    conv = RegularizationConvention.from_beta(args.beta)
    rec = reconstruct_net(solution, problem, conv)
    seed = None if report.method != "sampled" else report.seed
    net = rec.net
    meta = net.meta
    net = type(net)(net.W, net.bias, net.alpha,
                    type(meta)(meta.method, meta.beta, meta.lam, seed,
                               meta.pattern_count, meta.duality_gap, meta.flags))
    dataio.save_model(args.out, net, {
        "tol": args.tol,
        "pattern_method": report.method,
        "samples_drawn": report.samples_drawn,
    })
    train_mse = _mse(predict(net, X), y.values)
    print(f"objective: {solution.objective!r}")
    print(f"gap: {solution.gap!r} (certified: {solution.certified})")
    print(f"width: {rec.width}  train_mse: {train_mse!r}")
    print(f"wrote {args.out}")
    if args.certify:
        print(f"certificate: gap {solution.gap!r} "
              f"{'<=' if solution.gap <= args.tol * (1 + abs(solution.objective)) else '>'}"
              f" tol*(1+|obj|)")
    return 0


def cmd_train_sgd(args) -> int:
    X, y = _load_xy(args)
    cfg = TrainConfig(learning_rate=args.lr, epochs=args.epochs,
                      batch_size=args.batch, restarts=args.restarts,
                      seed=args.seed, weight_decay=args.weight_decay,
                      momentum=args.momentum)
    print(f"seed: {args.seed}")
    net, trace = train_sgd(X, y, args.width, cfg)
    dataio.save_model(args.out, net, {"epochs": args.epochs, "restarts": args.restarts})
    print(f"final objective: {float(trace[-1])!r}")
    print(f"wrote {args.out}")
    if args.trace_out:
        dataio.emit_csv(args.trace_out, np.column_stack([np.arange(trace.size), trace]),
                        header=["epoch", "objective"])
        print(f"wrote {args.trace_out}")
    return 0


def cmd_train_1d(args) -> int:
    series = dataio.read_series_csv(args.series)
    if series.size < 2:
        raise ShapeError("series needs at least two entries for lag-1 pairs")
    xs = series[:-1]
    y = series[1:]
    fit = solve_univariate(xs, y, args.beta, activation=args.activation,
                           tol=args.tol, intercept=args.intercept)
    support = int(np.sum(fit.zplus != 0.0) + np.sum(fit.zminus != 0.0))
    print(f"objective: {fit.objective!r}")
    print(f"gap: {fit.gap!r} (certified: {fit.certified})")
    print(f"support: {support}  width: {fit.net.m}")
    if fit.intercept is not None:
        print(f"intercept: {fit.intercept!r}")
    if args.out:
        dataio.save_model(args.out, fit.net, {"activation": args.activation})
        print(f"wrote {args.out}")
    if args.dict_out:
        header = [dataio.format_float(v) for v in xs]
        dataio.emit_csv(args.dict_out, fit.dictionary.Aplus, header=header)
        print(f"wrote {args.dict_out}")
    return 0


def cmd_wedge(args) -> int:
    X, y = _load_xy(args)
    fit = train_wedge_lasso(X, y, args.beta, p=args.p, with_bias=args.bias,
                            tol=args.tol)
    print(f"dictionary: {fit.dictionary.width} columns "
          f"({len(fit.dictionary.dropped)} dropped)")
    print(f"objective: {fit.objective!r}")
    print(f"gap: {fit.gap!r} (certified: {fit.certified})")
    print(f"support: {int(np.sum(fit.z != 0.0))}")
    print(f"train_mse: {_mse(fit.fitted, y.values)!r}")
    if args.dict_out:
        header = ["|".join(str(i) for i in J) for J in fit.dictionary.multi_indices]
        dataio.emit_csv(args.dict_out, fit.dictionary.A, header=header)
        print(f"wrote {args.dict_out}")
    return 0


def cmd_predict(args) -> int:
    net = dataio.load_model(args.model)
    X = dataio.ingest_csv(args.data)
    yhat = predict(net, X)
    dataio.emit_csv(args.out, yhat)
    print(f"wrote {args.out}")
    return 0


def cmd_eval(args) -> int:
    net = dataio.load_model(args.model)
    X, y = _load_xy(args)
    mse = _mse(predict(net, X), y.values)
    print(f"mse: {mse!r}")
    return 0


def cmd_path(args) -> int:
    X, y = _load_xy(args)
    betas = sorted({float(b) for b in args.betas.split(",")}, reverse=True)
    report = _pattern_report(X, args)
    points = reg_path(X, y, report.patterns, betas, tol=args.tol,
                      witnesses=report.witnesses)
    lines = ["beta,objective,gap,active_groups,train_mse"]
    for pt in points:
        if pt.solution is None:
            print(f"beta {pt.beta}: {pt.error}", file=sys.stderr)
            lines.append(f"{dataio.format_float(pt.beta)},nan,nan,0,nan")
            continue
        problem = build_problem(X, y, pt.beta, report.patterns, report.witnesses)
        mse = _mse(fitted_values(problem, pt.solution), y.values)
        lines.append(",".join([dataio.format_float(pt.beta),
                               dataio.format_float(pt.solution.objective),
                               dataio.format_float(pt.solution.gap),
                               str(pt.solution.active_groups),
                               dataio.format_float(mse)]))
    dataio.atomic_write_text(args.out, "\n".join(lines) + "\n")
    print(f"wrote {args.out}")
    return 0


def cmd_certify(args) -> int:
    net = dataio.load_model(args.model)
    if net.bias is not None:
        raise ValueError("certification applies to bias-free models; "
                         "train on lifted features to fold a bias in")
    X, y = _load_xy(args)
    if net.d != X.d:
        raise ShapeError(f"model expects {net.d} features, data has {X.d}")
    net = balance_rescale(net)
    base = _pattern_report(X, args)
    neuron_patterns = [pattern_of(X, net.W[:, j]) for j in range(net.m)
                       if np.linalg.norm(net.W[:, j]) > 0.0]
    patterns = PatternSet.from_iterable(list(base.patterns) + neuron_patterns)
    problem = build_problem(X, y, args.beta, patterns)
    index = {p.bits: g for g, p in enumerate(patterns)}
    U = np.zeros((X.d, len(patterns)))
    V = np.zeros((X.d, len(patterns)))
    for j in range(net.m):
        w = net.W[:, j]
        a = net.alpha[j]
        if a == 0.0 or np.linalg.norm(w) == 0.0:
            continue
        g = index[pattern_of(X, w).bits]
        if a > 0:
            U[:, g] += w * a
        else:
            V[:, g] += w * (-a)
    from .solver import candidate_gap

    gap, primal = candidate_gap(problem, U, V)
    print(f"objective: {primal!r}")
    print(f"gap: {gap!r}")
    ok = gap <= args.tol
    print(f"certified: {ok}")
    return 0 if ok else 1


def cmd_ar(args) -> int:
    spec = dataio.SeriesSpec(path=args.series, lags=args.lags, split=args.split)
    X_train, y_train, X_test, y_test = spec.featurize()
    for name, value in (("X_train", X_train), ("y_train", y_train),
                        ("X_test", X_test), ("y_test", y_test)):
        path = f"{args.out_prefix}_{name}.csv"
        if value is None:
            dataio.atomic_write_text(path, "\n")
        elif name.startswith("X"):
            dataio.emit_data_csv(path, value)
        else:
            dataio.emit_csv(path, value.values)
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relulasso",
        description="Certified globally optimal two-layer ReLU training "
                    "(data CSVs are row-per-sample)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("arrangements", help="enumerate or sample activation patterns")
    p.add_argument("--data", required=True)
    _add_pattern_flags(p)
    p.add_argument("--out", required=True, help="output pattern JSON")
    p.set_defaults(func=cmd_arrangements)

    p = sub.add_parser("train", help="convex training with a duality certificate")
    p.add_argument("--data", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--beta", type=float, required=True)
    _add_pattern_flags(p)
    p.add_argument("--tol", type=float, default=_DEFAULT_TOL)
    p.add_argument("--out", required=True, help="output model JSON")
    p.add_argument("--certify", action="store_true",
                   help="also print whether the gap met the tolerance")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("train-sgd", help="non-convex baseline trainer")
    p.add_argument("--data", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--lr", type=float, required=True)
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weight-decay", type=float, default=0.0)
    p.add_argument("--momentum", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.add_argument("--trace-out", default=None, help="objective trace CSV")
    p.set_defaults(func=cmd_train_sgd)

    p = sub.add_parser("train-1d", help="lag-1 autoregression via the hinge dictionary")
    p.add_argument("--series", required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--activation", choices=("relu", "abs"), default="relu")
    p.add_argument("--intercept", action="store_true")
    p.add_argument("--tol", type=float, default=_DEFAULT_TOL)
    p.add_argument("--out", default=None)
    p.add_argument("--dict-out", default=None, help="dictionary CSV export")
    p.set_defaults(func=cmd_train_1d)

    p = sub.add_parser("wedge", help="volume-ratio dictionary Lasso")
    p.add_argument("--data", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--p", type=int, choices=(1, 2), default=2)
    p.add_argument("--bias", action="store_true")
    p.add_argument("--tol", type=float, default=_DEFAULT_TOL)
    p.add_argument("--dict-out", default=None)
    p.set_defaults(func=cmd_wedge)

    p = sub.add_parser("predict", help="evaluate a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="mean squared error of a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--labels", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("path", help="warm-started sweep over regularization weights")
    p.add_argument("--data", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--betas", required=True, help="comma-separated weights")
    _add_pattern_flags(p)
    p.add_argument("--tol", type=float, default=_DEFAULT_TOL)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_path)

    p = sub.add_parser(
        "certify",
        help="duality gap of a saved model; exit 0 iff gap <= tol",
        description="The gap is measured against the requested pattern "
                    "collection unioned with the model's own activation "
                    "patterns, so it can exceed the training-time gap when "
                    "sampling finds chambers the solve never saw; with "
                    "--exact it certifies against the complete program.")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--beta", type=float, required=True)
    _add_pattern_flags(p)
    p.add_argument("--tol", type=float, default=_DEFAULT_TOL)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("ar", help="autoregressive featurization to four CSVs")
    p.add_argument("--series", required=True)
    p.add_argument("--lags", type=int, required=True)
    p.add_argument("--split", type=float, required=True)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_ar)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, ShapeError, ScaleLimitError, ConvergenceError,
            dataio.ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
