"""Command-line entry point.

Exit status is 0 on success, 1 on runtime failures and 2 on usage errors.
Payloads go to standard output (or ``--output``); diagnostics go to standard
error. ``DAFPS_THREADS`` sets the default for ``--threads``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __doc__ as _pkg_doc
from ._backend import AVAILABLE, get_backend
from .data import FIG1_MIXTURE, MixtureSpec, ParseError, format_points, load_points, synth_mixture
from .density import DEFAULT_EPS_X
from .harness import ExperimentPlan, PlanError, fig1_summary, resolve_count, run_plan, time_selection
from .knn import ParameterError, build_table, default_threads
from .metrics import eval_errors
from .oracle import GuardError, check_guard, reports_to_csv, sweep
from .regression import Kernel, NumericalError, budget_count, krr_fit, krr_predict, read_predictions
from .selectors import METHODS, PREFIXABLE, Selection, run_method, tune_gamma


class UsageError(Exception):
    """Bad flags or inputs that do not fit them; maps to exit status 2."""


def _number(text):
    """Integers stay integers (counts); anything with a point is a float."""
    try:
        return int(text)
    except ValueError:
        v = float(text)
        if not math.isfinite(v):
            raise argparse.ArgumentTypeError(f"not a finite number: {text!r}") from None
        return v


def _positive(text):
    v = float(text)
    if not v > 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _grid(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None
    if not vals or any(not v > 0 for v in vals):
        raise argparse.ArgumentTypeError("grid values must be positive")
    return vals


def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _note(msg):
    print(msg, file=sys.stderr)


def _add_input(p, required=True):
    p.add_argument("--input", required=required, help="CSV of points, one per row")
    p.add_argument("--header", action="store_true", help="first row is a header")
    p.add_argument("--label-column", default=None, help="label column index or 'last'")


def _add_budget(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--budget", type=float, help="fraction of the pool in (0, 1]")
    g.add_argument("--budget-count", type=int, help="number of points")


def _load(args, label_column=None):
    lc = args.label_column if args.label_column is not None else label_column
    try:
        return load_points(args.input, has_header=args.header, label_column=lc)
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc.strerror or exc}") from None


def _budget(args, n):
    if args.budget is not None:
        if not 0 < args.budget <= 1:
            raise UsageError(f"--budget must be a fraction in (0, 1], got {args.budget}")
        return budget_count(float(args.budget), n)
    if not 1 <= args.budget_count <= n:
        raise UsageError(f"--budget-count must be in 1..{n}, got {args.budget_count}")
    return args.budget_count


def _valid_method(name):
    if name in METHODS:
        return name
    if name.startswith("fps_prefixed(") and name.endswith(")") and name[13:-1] in PREFIXABLE:
        return name
    raise argparse.ArgumentTypeError(
        f"unknown method {name!r}; choose from {', '.join(METHODS)} or fps_prefixed(<{'|'.join(PREFIXABLE)}>)")


def cmd_select(args):
    ps = _load(args)
    n = ps.n
    b = _budget(args, n)
    params = {}
    method = args.method
    if args.u is not None:
        u = resolve_count(args.u, n)
        if method == "dafps" and not 0 <= u < b:
            raise UsageError(f"--u gives {u} prefix points; need 0 <= u < b = {b}")
        if method.startswith("fps_prefixed") and not 0 <= u <= b:
            raise UsageError(f"--u gives {u} prefix points; need 0 <= u <= b = {b}")
        if method == "dafps" or method.startswith("fps_prefixed"):
            params["u"] = u
    table = None
    if method == "dafps":
        k = args.k
        if not 1 <= k < n:
            raise UsageError(f"--k must be in 1..{n - 1}, got {k}")
        params.update(k=k, eps_x=args.eps_x)
        if k > 1:
            table = build_table(ps, k, threads=args.threads)
    if method in ("facility_gauss", "fps_prefixed(facility_gauss)"):
        if args.gamma is None:
            raise UsageError("facility_gauss needs --gamma")
        params["gamma"] = args.gamma
    sel = run_method(method, ps, b, seed=args.seed, table=table, **params)
    _emit(sel.to_json(indent=None) + "\n", args.output)
    _note(f"selected {len(sel.indices)} of {n} points with {sel.method}")
    return 0


def cmd_evaluate(args):
    ps = _load(args, label_column="last")
    with open(args.selection) as fh:
        sel = Selection.from_json(fh.read())
    n = ps.n
    if any(not 0 <= i < n for i in sel.indices):
        raise UsageError("selection indices fall outside the pool")
    rest = np.setdiff1d(np.arange(n), sel.indices)
    if rest.size == 0:
        raise RuntimeError("the selection covers the whole pool; the evaluation complement is empty")
    if ps.labels is None:
        raise UsageError("evaluation needs labels (--label-column)")
    if args.predictions:
        try:
            idx, pred = read_predictions(args.predictions, n)
        except ValueError as exc:
            raise UsageError(f"{args.predictions}: {exc}") from None
        if len(idx) != len(rest):
            raise UsageError(f"{args.predictions}: {len(idx)} predictions for an evaluation set of {len(rest)}")
        if not np.array_equal(np.sort(idx), rest):
            raise UsageError(f"{args.predictions}: indices do not match the evaluation complement")
        pred = pred[np.argsort(idx)]
    else:
        if args.width is None or args.lam is None:
            raise UsageError("give --predictions, or --kernel with --width and --lam")
        model = krr_fit(ps, sel.indices, Kernel(args.kernel, args.width), args.lam)
        if model.jitter:
            _note(f"kernel system needed jitter {model.jitter:g}")
        pred = krr_predict(model, ps, rest)
    rep = eval_errors(ps.labels[rest], pred)
    _emit(rep.to_json() + "\n", args.output)
    if args.csv_append:
        with open(args.csv_append, "a", newline="") as fh:
            fh.write(rep.csv_row(sel.method, len(sel.indices), sel.seed))
    return 0


def cmd_oracle(args):
    sizes = [args.n] if args.n is not None else [12]
    bs = [args.b] if args.b is not None else [3]
    for n in sizes:
        for b in bs:
            if not 1 <= b < n:
                raise UsageError(f"need 1 <= b < n, got b={b}, n={n}")
            try:
                check_guard(n, b)
            except GuardError as exc:
                raise UsageError(str(exc)) from None
    if args.k is not None and args.n is not None and not 2 <= args.k < args.n:
        raise UsageError(f"need 2 <= k < n, got k={args.k}")
    reports = sweep(trials=args.trials, seed=args.seed, n=args.n, b=args.b, k=args.k, d=args.d, eps_x=args.eps_x)
    _emit(reports_to_csv(reports), args.output)
    bad2 = sum(not r.holds_thm2 for r in reports)
    bad3 = sum(not r.holds_thm3 for r in reports)
    _note(f"{len(reports)} instances: {len(reports) - bad2} within 2k, {len(reports) - bad3} within sigma*gamma")
    return 1 if bad2 or bad3 else 0


def cmd_synth(args):
    base = FIG1_MIXTURE
    spec = MixtureSpec(
        args.central if args.central is not None else base.central_count,
        args.corner if args.corner is not None else base.corner_count,
        args.uniform if args.uniform is not None else base.uniform_count,
        seed=args.seed,
    )
    ps = synth_mixture(spec)
    _emit(format_points(ps), args.output)
    _note(f"wrote {ps.n} points")
    return 0


def cmd_tune_gamma(args):
    ps = _load(args)
    b = _budget(args, ps.n)
    curves = tune_gamma(ps, b, args.grid, start=args.start)
    doc = {"b": b, "start": args.start, "gains": {repr(g): [float(v) for v in c] for g, c in curves.items()}}
    _emit(json.dumps(doc) + "\n", args.output)
    return 0


def cmd_bench(args):
    if args.budget is not None and not 0 < args.budget <= 1:
        raise UsageError("--budget must be a fraction in (0, 1]")
    budget = args.budget if args.budget is not None else args.budget_count
    if args.budget_count is not None and not 1 <= args.budget_count <= args.n:
        raise UsageError(f"--budget-count must be in 1..{args.n}")
    if args.method == "dafps" and not 1 <= args.k < args.n:
        raise UsageError(f"--k must be in 1..{args.n - 1}")
    try:
        kernels = get_backend(args.backend)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = time_selection(args.method, n=args.n, d=args.d, budget=budget, k=args.k, seed=args.seed,
                         threads=args.threads, kernels=kernels)
    out["backend"] = args.backend or next(k for k, v in AVAILABLE.items() if v is kernels)
    _emit(json.dumps(out) + "\n", args.output)
    return 0


def cmd_run(args):
    try:
        plan = ExperimentPlan.load(args.plan)
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise UsageError(f"bad plan {args.plan}: {exc}") from None
    except OSError as exc:
        raise UsageError(f"cannot read {args.plan}: {exc.strerror or exc}") from None
    if args.workers is not None:
        plan.workers = args.workers
    table = run_plan(plan, threads=args.threads)
    _emit(table.to_csv(), args.output)
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(table.to_json(timing=not args.no_timing) + "\n")
    failed = sum(r.status == "failed" for r in table.runs)
    if failed:
        _note(f"{failed} of {len(table.runs)} runs failed")
    return 1 if failed else 0


def cmd_fig1(args):
    _emit(json.dumps(fig1_summary(args.seeds, b=args.b, k=args.k).to_dict()) + "\n", args.output)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="dafps", description=_pkg_doc)
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: $DAFPS_THREADS or all cores)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("select", help="choose a training subset")
    _add_input(s)
    s.add_argument("--method", type=_valid_method, default="dafps")
    _add_budget(s)
    s.add_argument("--k", type=int, default=100, help="neighbor count for the density weights")
    s.add_argument("--u", type=_number, default=None, help="FPS prefix: a count, or a fraction of the pool")
    s.add_argument("--eps-x", type=float, default=DEFAULT_EPS_X)
    s.add_argument("--gamma", type=_positive, default=None, help="facility_gauss similarity scale")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output", default=None)
    s.set_defaults(func=cmd_select)

    e = sub.add_parser("evaluate", help="score a selection on its complement")
    _add_input(e)
    e.add_argument("--selection", required=True)
    e.add_argument("--predictions", default=None, help="CSV of (index, prediction) for the complement")
    e.add_argument("--kernel", choices=("gaussian", "cauchy"), default="gaussian")
    e.add_argument("--width", type=_positive, default=None, help="gamma (gaussian) or gamma_c (cauchy)")
    e.add_argument("--lam", type=_positive, default=None)
    e.add_argument("--csv-append", default=None)
    e.add_argument("--output", default=None)
    e.set_defaults(func=cmd_evaluate)

    o = sub.add_parser("oracle", help="check the approximation bounds on small instances")
    o.add_argument("--trials", type=int, default=200)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--n", type=int, default=None)
    o.add_argument("--b", type=int, default=None)
    o.add_argument("--k", type=int, default=None)
    o.add_argument("--d", type=int, default=2)
    o.add_argument("--eps-x", type=float, default=DEFAULT_EPS_X)
    o.add_argument("--output", default=None)
    o.set_defaults(func=cmd_oracle)

    y = sub.add_parser("synth", help="generate the three-component mixture")
    y.add_argument("--preset", choices=("fig1",), default="fig1")
    y.add_argument("--seed", type=int, default=0)
    y.add_argument("--central", type=int, default=None)
    y.add_argument("--corner", type=int, default=None)
    y.add_argument("--uniform", type=int, default=None)
    y.add_argument("--output", default=None)
    y.set_defaults(func=cmd_synth)

    t = sub.add_parser("tune-gamma", help="facility-location gain curves over a gamma grid")
    _add_input(t)
    _add_budget(t)
    t.add_argument("--grid", type=_grid, default=[1000, 10, 5, 1, 0.1, 0.01])
    t.add_argument("--start", type=int, default=None, help="fix the first pick (default: greedy)")
    t.add_argument("--output", default=None)
    t.set_defaults(func=cmd_tune_gamma)

    bch = sub.add_parser("bench", help="time one selection on a uniform random pool")
    bch.add_argument("--method", type=_valid_method, default="dafps")
    bch.add_argument("--n", type=int, default=10_000)
    bch.add_argument("--d", type=int, default=2)
    _add_budget(bch, required=False)
    bch.add_argument("--k", type=int, default=100)
    bch.add_argument("--seed", type=int, default=0)
    bch.add_argument("--backend", choices=sorted(AVAILABLE), default=None)
    bch.add_argument("--output", default=None)
    bch.set_defaults(func=cmd_bench, budget=None)

    r = sub.add_parser("run", help="run an experiment plan")
    r.add_argument("--plan", required=True)
    r.add_argument("--output", default=None, help="result CSV (default: stdout)")
    r.add_argument("--json", default=None, help="also write the results as JSON")
    r.add_argument("--no-timing", action="store_true", help="leave wall-clock out of the JSON")
    r.add_argument("--workers", type=int, default=None)
    r.set_defaults(func=cmd_run)

    f = sub.add_parser("fig1", help="central-cluster occupancy on the mixture")
    f.add_argument("--seeds", type=int, default=5)
    f.add_argument("--b", type=int, default=100)
    f.add_argument("--k", type=int, default=100)
    f.add_argument("--output", default=None)
    f.set_defaults(func=cmd_fig1)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is None:
        args.threads = default_threads()
    elif args.threads < 1:
        parser.error("--threads must be at least 1")
    if getattr(args, "command", None) == "bench" and args.budget is None and args.budget_count is None:
        args.budget = 0.2
    try:
        return args.func(args)
    except (UsageError, ParameterError, PlanError) as exc:
        _note(f"dafps: error: {exc}")
        return 2
    except (ParseError, NumericalError, RuntimeError, ValueError, OSError) as exc:
        _note(f"dafps: {type(exc).__name__}: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
