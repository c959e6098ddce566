"""Command-line front end: fit, curve, gradcheck, orthocheck, train, eval.

Exit codes: 0 success, 1 invalid flags or inputs, 2 numerical/runtime
failure.  Summaries go to stdout as one line of ``key=value`` pairs.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import kernels
from .activations import OpauParams, PoleError, activation_backward
from .bases import PolyBasis, Quadrature, normalized_gram, values_at_zero
from .datasets import DatasetBatch, DatasetError, load_csv, load_idx
from .fit import TARGETS, FitTask, ZeroCenter, published_params, fit_opau
from .gradcheck import gradcheck_params, gradcheck_random
from .nn import ACTIVATIONS, build_network, count_extra_params
from .optim import NonFiniteGradientError
from .train import (
    TrainConfig,
    TrainingDiverged,
    atomic_write_text,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    train,
    write_metrics_csv,
)

EXIT_OK, EXIT_INVALID, EXIT_FAILURE = 0, 1, 2


class UsageError(Exception):
    """Invalid user input detected after parsing."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _basis(text: str) -> PolyBasis:
    try:
        return PolyBasis.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _summary(**pairs) -> str:
    def fmt(v):
        if isinstance(v, bool):
            return str(v).lower()
        if isinstance(v, float):
            return repr(v)
        return str(v)

    return " ".join(f"{k}={fmt(v)}" for k, v in pairs.items())


def _load_params(text: str) -> OpauParams:
    """Accept a JSON file path, inline JSON, or ``published:<BASIS>``."""
    try:
        if text.lower().startswith("published:"):
            return published_params(text.split(":", 1)[1])
        raw = text if text.lstrip().startswith("{") else Path(text).read_text(encoding="utf-8")
        return OpauParams.from_dict(json.loads(raw))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read activation parameters from {text!r}: {exc}") from None


def _write_or_print(out, text: str):
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        atomic_write_text(out, text)


# --- fit ---------------------------------------------------------------------


def cmd_fit(args) -> int:
    task = FitTask(
        basis=args.basis, k=args.k, l=args.l, target=args.target, alpha=args.alpha,
        lo=args.lo, hi=args.hi, samples=args.samples,
        constraint=ZeroCenter.parse(args.constraint), max_iter=args.max_iter,
        seed=args.seed, restarts=args.restarts, d_bound=args.d_bound,
    )
    try:
        task.validate()
        task.constraint.parameterization(values_at_zero(task.basis, task.k))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = fit_opau(task)
    doc = result.to_dict()
    _write_or_print(args.out, json.dumps(doc, indent=2) + "\n")
    print(_summary(
        basis=task.basis.value if isinstance(task.basis, PolyBasis) else task.basis,
        rmse=result.rmse, max_abs_err=result.max_abs_err,
        iterations=result.iterations, converged=result.converged,
    ))
    if args.strict and not result.converged:
        print("fit did not converge", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


# --- curve -------------------------------------------------------------------


def cmd_curve(args) -> int:
    params = _load_params(args.params)
    if not (math.isfinite(args.lo) and math.isfinite(args.hi)) or not args.lo < args.hi:
        raise UsageError(f"need lo < hi, got lo={args.lo} hi={args.hi}")
    if args.samples < 2:
        raise UsageError("need at least 2 samples")
    x = np.linspace(args.lo, args.hi, args.samples)
    y, dy, _, _ = activation_backward(params, x, np.ones_like(x))
    buf = io.StringIO()
    buf.write("x,y,dy\n")
    for row in zip(x, y, dy):
        buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
    _write_or_print(args.out, buf.getvalue())
    if args.out is not None and str(args.out) != "-":
        print(_summary(rows=args.samples, out=args.out))
    return EXIT_OK


# --- diagnostics ---------------------------------------------------------------


def cmd_gradcheck(args) -> int:
    if args.params is None and args.random is None:
        raise UsageError("give --params or --random N")
    if args.random is not None and args.random < 1:
        raise UsageError("--random needs a positive count")
    if args.params is not None:
        params = _load_params(args.params)
        rng = np.random.default_rng(args.seed)
        xs = rng.uniform(args.lo, args.hi, args.points)
        report = gradcheck_params(params, xs, args.h)
    else:
        report = gradcheck_random(args.random, args.seed, args.h)
    ok = report.passed(args.tol)
    print(_summary(samples=report.samples, max_rel_err=report.max_rel_err, tol=args.tol, passed=ok))
    return EXIT_OK if ok else EXIT_FAILURE


def cmd_orthocheck(args) -> int:
    if args.nmax < 0:
        raise UsageError("--nmax must be >= 0")
    if args.nodes < 1:
        raise UsageError("--nodes must be >= 1")
    gram = normalized_gram(args.basis, args.nmax, Quadrature(nodes=args.nodes, rule=args.rule))
    off = gram - np.diag(np.diag(gram))
    worst = float(np.max(np.abs(off))) if gram.size > 1 else 0.0
    for row in gram:
        print(" ".join(f"{v: .3e}" for v in row))
    ok = worst <= args.tol
    print(_summary(basis=args.basis.value, nmax=args.nmax, max_offdiag=worst, tol=args.tol, passed=ok))
    return EXIT_OK if ok else EXIT_FAILURE


# --- train / eval ------------------------------------------------------------


def _parse_arch(text: str) -> list[int]:
    try:
        sizes = [int(p) for p in text.split("-")]
    except ValueError:
        raise UsageError(f"architecture {text!r} must look like 784-128-10") from None
    if len(sizes) < 2 or any(s <= 0 for s in sizes):
        raise UsageError(f"architecture {text!r} needs at least two positive sizes")
    return sizes


def _load_data(fmt, data, labels, label_column, num_classes) -> DatasetBatch:
    try:
        if fmt == "idx":
            return load_idx(data, labels, num_classes or 10)
        return load_csv(data, label_column, num_classes)
    except (OSError, DatasetError) as exc:
        raise UsageError(str(exc)) from None


def cmd_train(args) -> int:
    sizes = _parse_arch(args.arch)
    config = TrainConfig(
        optimizer=args.optimizer, lr=args.lr, momentum=args.momentum, batch_size=args.batch,
        epochs=args.epochs, seed=args.seed, init=args.init,
        clip_activation_grad=args.clip_act_grad,
    )
    try:
        config.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    data = _load_data(args.format, args.data, args.labels, args.label_column, args.num_classes)
    test = None
    if args.test_data is not None:
        test = _load_data(args.format, args.test_data, args.test_labels, args.label_column,
                          data.num_classes)
    if sizes[0] != data.dim:
        raise UsageError(f"architecture input {sizes[0]} does not match {data.dim} features")
    if sizes[-1] < data.num_classes:
        raise UsageError(f"architecture output {sizes[-1]} < {data.num_classes} classes")
    try:
        net = build_network(sizes, args.activation, seed=args.seed, init=args.init, loss=args.loss)
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    log = None
    if args.verbose:
        def log(m):
            print(_summary(epoch=m.epoch, train_loss=round(m.train_loss, 6),
                           train_acc=round(m.train_acc, 6)), file=sys.stderr)
    try:
        history = train(net, data, config, test_data=test, log=log)
    except (TrainingDiverged, NonFiniteGradientError, PoleError) as exc:
        snapshot = getattr(exc, "snapshot", None)
        print(f"training aborted: {exc}", file=sys.stderr)
        if snapshot is not None:
            print(json.dumps(snapshot), file=sys.stderr)
        return EXIT_FAILURE

    if args.metrics_out is not None:
        write_metrics_csv(args.metrics_out, history)
    if args.checkpoint_out is not None:
        save_checkpoint(args.checkpoint_out, net, config, {"arch": sizes, "activation": args.activation})
    extra = count_extra_params(net)
    last = history[-1] if history else None
    train_loss, train_acc = (last.train_loss, last.train_acc) if last else evaluate(net, data)
    test_acc = last.test_acc if last else math.nan
    print(_summary(
        activation=args.activation, epochs=len(history),
        train_loss=round(train_loss, 6), train_acc=round(train_acc, 6),
        test_acc=round(test_acc, 6) if not math.isnan(test_acc) else "nan",
        extra_params_formula=extra.formula, extra_params_stored=extra.stored,
    ))
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        net, _ = load_checkpoint(args.checkpoint)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot load checkpoint: {exc}") from None
    data = _load_data(args.format, args.data, args.labels, args.label_column, args.num_classes)
    if data.dim != net.input_dim:
        raise UsageError(f"data has {data.dim} features, checkpoint expects {net.input_dim}")
    loss, acc = evaluate(net, data)
    print(_summary(samples=len(data), loss=round(loss, 6), acc=round(acc, 6)))
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="opau", description=__doc__, formatter_class=fmt)
    parser.add_argument("--version", action="version",
                        version=f"opau (kernels: {kernels.BACKEND})")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="least-squares fit of a safe unit to a target activation",
                       formatter_class=fmt)
    p.add_argument("--basis", type=_basis, default="HP1",
                   help="one of " + ", ".join(b.value for b in PolyBasis))
    p.add_argument("--k", type=int, default=5, help="numerator degree")
    p.add_argument("--l", type=int, default=4, help="denominator degree")
    p.add_argument("--target", choices=TARGETS, default="leaky_relu", help="function to approximate")
    p.add_argument("--alpha", type=float, default=0.01, help="target slope/scale or constant value")
    p.add_argument("--lo", type=float, default=-3.0, help="left end of the sample grid")
    p.add_argument("--hi", type=float, default=3.0, help="right end of the sample grid")
    p.add_argument("--samples", type=int, default=1000, help="uniform grid points")
    p.add_argument("--constraint", default="none",
                   help="zero-centering: none, case1, case2[:cI], case3[:cI]")
    p.add_argument("--max-iter", type=int, default=500, help="iterations per start")
    p.add_argument("--restarts", type=int, default=4, help="extra randomised starts")
    p.add_argument("--d-bound", type=float, default=10.0, help="bound on |d_j|")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--strict", action="store_true", help="exit 2 when the fit does not converge")
    p.add_argument("--out", type=Path, default=None, help="JSON output path; None prints to stdout")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("curve", help="export x, G(x), G'(x) as CSV", formatter_class=fmt)
    p.add_argument("--params", required=True, help="JSON file, inline JSON, or published:<BASIS>")
    p.add_argument("--lo", type=float, default=-3.0, help="left end of the sample grid")
    p.add_argument("--hi", type=float, default=3.0, help="right end of the sample grid")
    p.add_argument("--samples", type=int, default=601, help="rows in the CSV")
    p.add_argument("--out", type=Path, default=None, help="CSV output path; None prints to stdout")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("gradcheck", help="compare analytic gradients with central differences",
                       formatter_class=fmt)
    p.add_argument("--params", default=None, help="JSON file, inline JSON, or published:<BASIS>")
    p.add_argument("--random", type=int, default=None, metavar="N",
                   help="check N random units and inputs away from kinks")
    p.add_argument("--points", type=int, default=100, help="inputs checked with --params")
    p.add_argument("--lo", type=float, default=-3.0, help="left end of the sample grid")
    p.add_argument("--hi", type=float, default=3.0, help="right end of the sample grid")
    p.add_argument("--h", type=float, default=1e-5, help="difference step")
    p.add_argument("--tol", type=float, default=1e-5, help="largest accepted relative error")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("orthocheck", help="normalised Gram matrix of a basis", formatter_class=fmt)
    p.add_argument("--basis", type=_basis, required=True, help="basis to check")
    p.add_argument("--nmax", type=int, default=6, help="highest degree")
    p.add_argument("--nodes", type=int, default=64, help="quadrature nodes (per panel for composite)")
    p.add_argument("--rule", choices=["gauss", "composite"], default="gauss", help="quadrature rule")
    p.add_argument("--tol", type=float, default=1e-6, help="largest accepted normalised off-diagonal")
    p.set_defaults(func=cmd_orthocheck)

    def data_flags(p, required=True):
        p.add_argument("--data", type=Path, required=required,
                       help="IDX images file or CSV file")
        p.add_argument("--labels", type=Path, default=None, help="IDX labels file")
        p.add_argument("--format", choices=["idx", "csv"], default="idx", help="dataset file format")
        p.add_argument("--label-column", default=None, help="CSV label column; None means the last column")
        p.add_argument("--num-classes", type=int, default=None, help="class count (idx: 10, csv: max label + 1)")

    p = sub.add_parser("train", help="train an MLP with per-layer activations", formatter_class=fmt)
    data_flags(p)
    p.add_argument("--test-data", type=Path, default=None, help="held-out features")
    p.add_argument("--test-labels", type=Path, default=None, help="held-out IDX labels")
    p.add_argument("--arch", default="784-128-10", help="layer sizes joined by dashes")
    p.add_argument("--activation", choices=ACTIVATIONS, default="hp1", help="hidden-layer activation")
    p.add_argument("--init", choices=["published", "fresh"], default="published",
                   help="published Leaky ReLU coefficients, or fit them now")
    p.add_argument("--loss", choices=["cross_entropy", "mse"], default="cross_entropy", help="training loss")
    p.add_argument("--epochs", type=int, default=10, help="passes over the data")
    p.add_argument("--batch", type=int, default=128, help="mini-batch size")
    p.add_argument("--optimizer", choices=["adam", "sgd"], default="adam", help="update rule")
    p.add_argument("--lr", type=float, default=1e-3, help="learning rate")
    p.add_argument("--momentum", type=float, default=0.0, help="SGD momentum")
    p.add_argument("--clip-act-grad", type=float, default=None,
                   help="clip activation-parameter gradients to this global norm")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--metrics-out", type=Path, default=None, help="per-epoch metrics CSV")
    p.add_argument("--checkpoint-out", type=Path, default=None, help="JSON checkpoint path")
    p.add_argument("--verbose", action="store_true", help="log every epoch to stderr")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset", formatter_class=fmt)
    p.add_argument("--checkpoint", type=Path, required=True, help="JSON checkpoint from train")
    data_flags(p)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"opau {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (PoleError, FloatingPointError) as exc:
        print(f"opau {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
