"""Budgeted comparison of auditors over repeated seeded runs."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..baselines import iid_audit, phased_cal_audit
from ..domain import load_class
from ..errors import FairAuditError, InvalidInput
from ..minimax import CostTable, minimax_audit
from ..oracle_auditor import oracle_audit
from .evaluation import avg_error, mp_diameter
from .generators import build_class
from .oracles import CountingOracle

METHODS = ("oracle", "cal", "iid", "minimax")
COLUMNS = (
    "method", "budget", "seed", "queries", "estimate", "true_mu",
    "abs_error", "diameter", "avg_error", "error",
)
SUMMARY_COLUMNS = (
    "method", "budget", "n", "diameter_mean", "diameter_median", "diameter_ci_low",
    "diameter_ci_high", "avg_error_mean", "avg_error_ci_low", "avg_error_ci_high",
    "abs_error_mean", "queries_mean", "errors",
)
Z95 = 1.959963984540054


@dataclass
class ExperimentConfig:
    class_source: object
    methods: list = field(default_factory=lambda: ["oracle", "cal", "iid"])
    budgets: list = field(default_factory=lambda: [20, 50, 80, 100, 120])
    repeats: int = 50
    eps: float = 0.05
    delta: float = 0.1
    seed: int = 0
    output: str | None = None
    target: int | None = None
    cal_mode: str = "checked"

    def __post_init__(self):
        if not isinstance(self.class_source, (str, dict)):
            raise InvalidInput("class_source must be a file path or a generator spec")
        if not self.methods or any(m not in METHODS for m in self.methods):
            raise InvalidInput(f"methods must be a nonempty subset of {METHODS}")
        if not self.budgets or any(int(b) != b or b < 0 for b in self.budgets):
            raise InvalidInput("budgets must be nonnegative integers")
        if any(b2 <= b1 for b1, b2 in zip(self.budgets, self.budgets[1:])):
            raise InvalidInput("budgets must be strictly increasing")
        if int(self.repeats) != self.repeats or self.repeats < 1:
            raise InvalidInput("repeats must be a positive integer")
        if not 0 < self.eps < 1 or not 0 < self.delta < 1:
            raise InvalidInput("eps and delta must lie in (0, 1)")
        if self.cal_mode not in ("checked", "sampled"):
            raise InvalidInput("cal_mode must be 'checked' or 'sampled'")

    @classmethod
    def from_dict(cls, data):
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise InvalidInput(f"unknown config field(s): {', '.join(sorted(extra))}")
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"{path}: line {exc.lineno}: {exc.msg}") from None
        return cls.from_dict(data)

    def to_dict(self):
        return asdict(self)


@dataclass
class ExperimentResults:
    rows: list
    summary: list
    target: int
    true_mu: float

    def rows_csv(self):
        return _to_csv(COLUMNS, self.rows)

    def summary_csv(self):
        return _to_csv(SUMMARY_COLUMNS, self.summary)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else format(v, ".12g")
    return str(v)


def _to_csv(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def repeat_seed(base, r):
    return int(np.random.SeedSequence([int(base), r]).generate_state(1)[0])


def load_source(cfg):
    if isinstance(cfg.class_source, str):
        C, target = load_class(cfg.class_source), None
    else:
        C, target = build_class(cfg.class_source, cfg.seed)
    if cfg.target is not None:
        target = cfg.target
    if target is None:
        target = int(np.random.default_rng(cfg.seed).integers(len(C)))
    if not 0 <= target < len(C):
        raise InvalidInput(f"target index {target} out of range for |H| = {len(C)}")
    return C, target


def run_method(method, C, target, cfg, budget, seed, table=None):
    oracle = CountingOracle.from_class(C, target)
    if method == "oracle":
        return oracle_audit(oracle, C, cfg.eps, cfg.delta, seed=seed, budget=budget)
    if method == "cal":
        return phased_cal_audit(oracle, C, cfg.eps, seed=seed, mode=cfg.cal_mode, budget=budget)
    if method == "iid":
        return iid_audit(oracle, C.domain, cfg.eps, cfg.delta, seed=seed, budget=budget, C=C)
    return minimax_audit(oracle, C, cfg.eps, budget=budget, table=table)


def _cell(args):
    method, budget, seed, C, target, cfg, table = args
    true_mu = float(C.mus[target])
    row = {"method": method, "budget": budget, "seed": seed, "true_mu": true_mu, "error": ""}
    try:
        res = run_method(method, C, target, cfg, budget, seed, table)
        row.update(
            queries=res.queries,
            estimate=float(res.estimate),
            abs_error=abs(float(res.estimate) - true_mu),
            diameter=mp_diameter(C, res.transcript),
            avg_error=avg_error(C, res.transcript, true_mu),
        )
    except FairAuditError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _ci(values):
    v = np.asarray(values, dtype=float)
    mean = float(v.mean())
    if len(v) < 2:
        return mean, mean, mean
    half = Z95 * float(v.std(ddof=1)) / math.sqrt(len(v))
    return mean, mean - half, mean + half


def summarize(rows, methods, budgets):
    out = []
    for method in methods:
        for budget in budgets:
            cell = [r for r in rows if r["method"] == method and r["budget"] == budget]
            ok = [r for r in cell if not r["error"]]
            rec = {"method": method, "budget": budget, "n": len(ok), "errors": len(cell) - len(ok)}
            if ok:
                d_mean, d_lo, d_hi = _ci([r["diameter"] for r in ok])
                a_mean, a_lo, a_hi = _ci([r["avg_error"] for r in ok])
                rec.update(
                    diameter_mean=d_mean,
                    diameter_median=float(np.median([r["diameter"] for r in ok])),
                    diameter_ci_low=d_lo,
                    diameter_ci_high=d_hi,
                    avg_error_mean=a_mean,
                    avg_error_ci_low=a_lo,
                    avg_error_ci_high=a_hi,
                    abs_error_mean=float(np.mean([r["abs_error"] for r in ok])),
                    queries_mean=float(np.mean([r["queries"] for r in ok])),
                )
            out.append(rec)
    return out


def summary_path(output):
    p = Path(output)
    return p.with_name(p.stem + "_summary" + p.suffix)


def run_experiment(cfg, workers=1):
    """Run every (method, budget, repeat) cell and return the results table.

    Each repeat ``r`` uses the seed derived from ``(cfg.seed, r)`` for every
    method and budget, so runs at larger budgets extend the transcripts of
    smaller ones.  Rows come out sorted by (method order, budget, repeat)
    regardless of ``workers``.
    """
    C, target = load_source(cfg)
    table = CostTable(cfg.eps) if "minimax" in cfg.methods else None
    seeds = [repeat_seed(cfg.seed, r) for r in range(cfg.repeats)]
    cells = [
        (method, budget, s, C, target, cfg, table)
        for method in cfg.methods
        for budget in cfg.budgets
        for s in seeds
    ]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_cell, cells, chunksize=8))
    else:
        rows = [_cell(c) for c in cells]
    res = ExperimentResults(rows, summarize(rows, cfg.methods, cfg.budgets), target, float(C.mus[target]))
    if cfg.output:
        out = Path(cfg.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(res.rows_csv())
        summary_path(out).write_text(res.summary_csv())
    return res
