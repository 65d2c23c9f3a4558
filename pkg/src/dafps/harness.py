"""Multi-method, multi-budget, multi-seed comparisons and summary tables.

A plan is a JSON document::

    {
      "dataset": "concrete.csv",
      "has_header": true,
      "label_column": "last",
      "normalize": true,
      "dedupe": true,
      "methods": [{"name": "random"},
                  {"name": "dafps", "params": {"k": 300, "u": 0.01}}],
      "budgets": [0.1, 0.2],
      "seeds": [0, 1, 2, 3, 4],
      "model": {"kind": "cauchy", "width": 0.01, "lam": 1e-4},
      "metrics": ["mae", "rmse", "maxae"],
      "workers": 1
    }

``model`` may instead carry ``"cv": {"budgets": [...], "folds": 5, "seed": 0}``
to pick one hyperparameter pair up front (shared by every method, budget and
seed), or ``"external": "preds/{method}_{budget}_{seed}.csv"`` to read
predictions written by another program. Fractional ``u`` and ``b`` values in
method params are fractions of the pool.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import CENTRAL_CENTER, FIG1_MIXTURE, MixtureSpec, PointSet, drop_duplicate_points, load_points, \
    normalize_unit_interval, synth_mixture
from .knn import build_table
from .metrics import eval_errors, fill_distance
from .regression import Kernel, budget_count, cv_grid_search, krr_fit, krr_predict, read_predictions
from .selectors import run_method, select_dafps, select_fps, select_random

ALL_METRICS = ("mae", "rmse", "maxae")
CENTRAL_RADIUS = 0.2


class PlanError(ValueError):
    pass


@dataclass
class MethodSpec:
    name: str
    params: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if not self.label:
            self.label = self.name


@dataclass
class ExperimentPlan:
    dataset: str
    methods: list
    budgets: list
    seeds: list
    model: dict | None = None
    metrics: tuple = ALL_METRICS
    has_header: bool = False
    label_column: object = "last"
    normalize: bool = False
    dedupe: bool = False
    workers: int = 1
    base_dir: str = ""

    def __post_init__(self):
        if not self.methods:
            raise PlanError("plan lists no methods")
        if not self.seeds:
            raise PlanError("plan lists no seeds")
        if not self.budgets:
            raise PlanError("plan lists no budgets")
        for b in self.budgets:
            if not (isinstance(b, (int, float)) and 0 < b <= 1):
                raise PlanError(f"budget {b!r} is not a fraction in (0, 1]")
        bad = set(self.metrics) - set(ALL_METRICS)
        if bad or not self.metrics:
            raise PlanError(f"metrics must be a nonempty subset of {ALL_METRICS}")
        labels = [m.label for m in self.methods]
        if len(set(labels)) != len(labels):
            raise PlanError("method labels must be unique")
        if self.workers < 1:
            raise PlanError("workers must be at least 1")

    @classmethod
    def from_dict(cls, d, base_dir=""):
        methods = []
        for m in d.get("methods", []):
            if isinstance(m, str):
                m = {"name": m}
            methods.append(MethodSpec(m["name"], dict(m.get("params", {})), m.get("label", "")))
        return cls(
            dataset=d["dataset"],
            methods=methods,
            budgets=[float(b) for b in d.get("budgets", [])],
            seeds=[int(s) for s in d.get("seeds", [])],
            model=d.get("model"),
            metrics=tuple(d.get("metrics", ALL_METRICS)),
            has_header=bool(d.get("has_header", False)),
            label_column=d.get("label_column", "last"),
            normalize=bool(d.get("normalize", False)),
            dedupe=bool(d.get("dedupe", False)),
            workers=int(d.get("workers", 1)),
            base_dir=str(base_dir),
        )

    @classmethod
    def load(cls, path):
        path = Path(path)
        with open(path) as fh:
            return cls.from_dict(json.load(fh), base_dir=path.parent)

    def resolve(self, p):
        p = Path(p)
        return p if p.is_absolute() or not self.base_dir else Path(self.base_dir) / p


@dataclass
class RunResult:
    method: str
    budget: float
    n_train: int
    seed: int
    status: str  # "ok", "degenerate" or "failed"
    metrics: dict = field(default_factory=dict)
    n_eval: int = 0
    fill: float = math.nan
    error: str = ""
    seconds: float = 0.0
    indices: list = field(default_factory=list)


@dataclass
class ResultTable:
    runs: list
    aggregates: list
    metrics: tuple
    model: dict | None = None

    def csv_header(self):
        cols = ["row_type", "method", "budget", "n_train", "seed", "status"]
        for m in self.metrics:
            cols += [m, f"{m}_std"]
        return cols + ["fill", "n_eval", "n_runs", "error"]

    def to_csv(self) -> str:
        """Runs then aggregates; no wall-clock, so reruns are byte-identical."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.csv_header())
        for r in self.runs:
            row = ["run", r.method, _num(r.budget), r.n_train, r.seed, r.status]
            for m in self.metrics:
                row += [_num(r.metrics.get(m, math.nan)), ""]
            w.writerow(row + [_num(r.fill), r.n_eval, 1, r.error])
        for a in self.aggregates:
            row = ["aggregate", a["method"], _num(a["budget"]), a["n_train"], "", a["status"]]
            for m in self.metrics:
                row += [_num(a[m]), _num(a[f"{m}_std"])]
            w.writerow(row + [_num(a["fill"]), "", a["n_runs"], ""])
        return buf.getvalue()

    def to_dict(self, timing=True):
        runs = []
        for r in self.runs:
            d = {"method": r.method, "budget": r.budget, "n_train": r.n_train, "seed": r.seed,
                 "status": r.status, "n_eval": r.n_eval, "fill": _jnum(r.fill), "error": r.error}
            d.update({m: _jnum(r.metrics.get(m, math.nan)) for m in self.metrics})
            if timing:
                d["seconds"] = r.seconds
            runs.append(d)
        aggs = [{k: _jnum(v) if isinstance(v, float) else v for k, v in a.items()} for a in self.aggregates]
        return {"model": self.model, "metrics": list(self.metrics), "runs": runs, "aggregates": aggs}

    def to_json(self, timing=True) -> str:
        return json.dumps(self.to_dict(timing), indent=2)


def _num(v):
    if isinstance(v, float) and not math.isfinite(v):
        return ""
    return repr(v) if isinstance(v, float) else str(v)


def _jnum(v):
    return v if math.isfinite(v) else None


def resolve_count(value, n):
    """Counts stay as they are; fractions in [0, 1] are floored against ``n``."""
    if isinstance(value, (bool, np.bool_)):
        raise PlanError(f"not a count: {value!r}")
    if isinstance(value, (int, np.integer)):
        return int(value)
    v = float(value)
    if 0 <= v <= 1:
        return int(math.floor(v * n + 1e-9))
    if v.is_integer():
        return int(v)
    raise PlanError(f"{value!r} is neither a count nor a fraction in [0, 1]")


def load_dataset(plan: ExperimentPlan) -> PointSet:
    ps = load_points(plan.resolve(plan.dataset), has_header=plan.has_header, label_column=plan.label_column)
    if plan.dedupe:
        ps = drop_duplicate_points(ps)
    if plan.normalize:
        ps = normalize_unit_interval(ps)
    return ps


def resolve_model(plan: ExperimentPlan, ps: PointSet):
    """Fix hyperparameters once; every method, budget and seed shares them."""
    model = plan.model
    if model is None or "external" in model:
        return model
    if ps.labels is None:
        raise PlanError("a model is configured but the dataset has no labels")
    kind = model.get("kind", "gaussian")
    if "cv" in model:
        cv = model["cv"]
        w, lam, _ = cv_grid_search(ps, cv.get("budgets", plan.budgets), kind=kind,
                                   widths=cv.get("widths"), lams=cv.get("lams"),
                                   folds=int(cv.get("folds", 5)), seed=int(cv.get("seed", 0)))
        return {"kind": kind, "width": w, "lam": lam}
    return {"kind": kind, "width": float(model["width"]), "lam": float(model["lam"])}


def _method_params(spec: MethodSpec, n):
    params = dict(spec.params)
    for key in ("u",):
        if key in params:
            params[key] = resolve_count(params[key], n)
    return params


def _run_one(ps, tables, spec, budget, seed, model, metrics, plan):
    n = ps.n
    b = budget_count(budget, n)
    res = RunResult(spec.label, budget, b, seed, "ok")
    if b >= n:
        res.status = "degenerate"
        res.error = "empty evaluation complement"
        return res
    t0 = time.perf_counter()
    try:
        params = _method_params(spec, n)
        table = tables.get(params.get("k")) if spec.name == "dafps" else None
        sel = run_method(spec.name, ps, b, seed=seed, table=table, **params)
        res.indices = list(sel.indices)
        res.fill = fill_distance(ps, sel.indices)
        rest = np.setdiff1d(np.arange(n), sel.indices)
        if model is not None:
            if "external" in model:
                path = plan.resolve(model["external"].format(method=spec.label, budget=budget, seed=seed))
                idx, pred = read_predictions(path, n)
                if not np.array_equal(np.sort(idx), rest):
                    raise ValueError(f"{path}: predictions do not cover the evaluation complement")
                pred = pred[np.argsort(idx)]
            else:
                fit = krr_fit(ps, sel.indices, Kernel(model["kind"], model["width"]), model["lam"])
                pred = krr_predict(fit, ps, rest)
            rep = eval_errors(ps.labels[rest], pred)
            res.metrics = {m: getattr(rep, m) for m in metrics}
            res.n_eval = rep.n_eval
        else:
            res.n_eval = len(rest)
    except Exception as exc:  # recorded, not raised: one bad run must not sink the table
        res.status = "failed"
        res.error = f"{type(exc).__name__}: {exc}"
    res.seconds = time.perf_counter() - t0
    return res


def aggregate(runs, metrics):
    """Mean and sample standard deviation over the ok seeds of each (method, budget)."""
    groups = {}
    for r in runs:
        groups.setdefault((r.method, r.budget), []).append(r)
    out = []
    for (method, budget), rs in groups.items():
        ok = [r for r in rs if r.status == "ok"]
        row = {"method": method, "budget": budget, "n_train": rs[0].n_train, "n_runs": len(ok),
               "status": "ok" if ok else rs[0].status}
        for m in metrics:
            vals = np.array([r.metrics.get(m, math.nan) for r in ok], dtype=float)
            row[m] = float(np.mean(vals)) if len(vals) else math.nan
            row[f"{m}_std"] = float(np.std(vals, ddof=1)) if len(vals) > 1 else math.nan
        fills = [r.fill for r in ok]
        row["fill"] = float(np.mean(fills)) if fills else math.nan
        out.append(row)
    return out


def run_plan(plan: ExperimentPlan, ps: PointSet | None = None, threads=None) -> ResultTable:
    """Run every (method, budget, seed) job; rows come back in plan order."""
    if ps is None:
        ps = load_dataset(plan)
    model = resolve_model(plan, ps)
    tables = {}
    for spec in plan.methods:
        if spec.name == "dafps":
            k = spec.params.get("k")
            if k is None:
                raise PlanError(f"method {spec.label!r} needs a k")
            k = int(k)
            spec.params["k"] = k
            if k > 1 and k not in tables:
                tables[k] = build_table(ps, k, threads=threads)
    jobs = [(spec, budget, seed) for spec in plan.methods for budget in plan.budgets for seed in plan.seeds]

    def work(job):
        spec, budget, seed = job
        return _run_one(ps, tables, spec, budget, seed, model, plan.metrics, plan)

    if plan.workers == 1:
        runs = [work(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=plan.workers) as pool:
            runs = list(pool.map(work, jobs))  # map keeps submission order
    return ResultTable(runs, aggregate(runs, plan.metrics), plan.metrics, model)


@dataclass
class Fig1Summary:
    counts: dict  # method -> per-seed occupancy counts
    b: int
    rdm_expected: float
    rdm_expected_sd: float

    def mean(self, method):
        return float(np.mean(self.counts[method]))

    def to_dict(self):
        return {
            "b": self.b,
            "methods": {m: {"counts": [int(c) for c in v], "mean": self.mean(m),
                            "std": float(np.std(v, ddof=1)) if len(v) > 1 else 0.0}
                        for m, v in self.counts.items()},
            "rdm_expected": self.rdm_expected,
            "rdm_expected_sd": self.rdm_expected_sd,
        }


def in_central_disc(points, center=CENTRAL_CENTER, radius=CENTRAL_RADIUS):
    diff = np.asarray(points) - np.asarray(center)
    return np.sqrt(np.einsum("ij,ij->i", diff, diff)) <= radius


def fig1_summary(seed_count=5, b=100, k=100, spec: MixtureSpec = FIG1_MIXTURE) -> Fig1Summary:
    """Central-disc occupancy of random, FPS and DA-FPS picks on the mixture.

    Seed ``s`` drives both the mixture draw and every selector. The random
    baseline's expectation is the hypergeometric mean ``b * m / n`` averaged
    over seeds, with ``m`` the pool points inside the disc; its standard
    deviation is that of the seed average.
    """
    counts = {"random": [], "fps": [], "dafps": []}
    exp_mean, exp_var = [], []
    for s in range(seed_count):
        ps = synth_mixture(MixtureSpec(spec.central_count, spec.corner_count, spec.uniform_count, seed=s,
                                       central_sigma=spec.central_sigma, corner_sigma=spec.corner_sigma))
        inside = in_central_disc(ps.points)
        table = build_table(ps, k)
        picks = {
            "random": select_random(ps, b, seed=s),
            "fps": select_fps(ps, b, seed=s),
            "dafps": select_dafps(ps, table, b, k=k, u=0, seed=s),
        }
        for m, sel in picks.items():
            counts[m].append(int(np.count_nonzero(inside[sel.indices])))
        n, p = ps.n, inside.mean()
        exp_mean.append(b * p)
        exp_var.append(b * p * (1 - p) * (n - b) / (n - 1))
    sd = math.sqrt(sum(exp_var)) / seed_count
    return Fig1Summary({m: np.array(v) for m, v in counts.items()}, b, float(np.mean(exp_mean)), sd)


def time_selection(method="dafps", n=10_000, d=2, budget=0.2, k=100, seed=0, threads=None, kernels=None):
    """Wall-clock of one selection on a uniform random pool; no correctness claim."""
    rng = np.random.default_rng(seed)
    ps = PointSet(rng.random((n, d)))
    b = budget_count(budget, n)
    out = {"method": method, "n": n, "d": d, "b": b, "k": k, "seed": seed, "table_seconds": 0.0}
    table = None
    if method == "dafps" and k > 1:
        t0 = time.perf_counter()
        table = build_table(ps, k, threads=threads)
        out["table_seconds"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    if method == "dafps":
        select_dafps(ps, table, b, k=k, seed=seed, kernels=kernels)
    elif method == "fps":
        select_fps(ps, b, seed=seed, kernels=kernels)
    else:
        run_method(method, ps, b, seed=seed)
    sel_s = time.perf_counter() - t0
    out["select_seconds"] = sel_s
    out["per_iteration_seconds"] = sel_s / b
    out["total_seconds"] = out["table_seconds"] + sel_s
    return out
