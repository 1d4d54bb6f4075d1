"""Command-line front end.  Exit codes: 0 success, 1 usage error, 2 runtime error."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from .baselines import iid_audit, phased_cal_audit
from .domain import load_class
from .errors import FairAuditError
from .gaussian import GaussianPopulations, LinearModel, analytic_mu, estimate_positive, gaussian_audit
from .harness.evaluation import mp_diameter
from .harness.experiment import ExperimentConfig, run_experiment, summary_path
from .harness.oracles import CountingOracle
from .minimax import CostTable, cost, min_specifying_set, minimax_audit, xtd
from .oracle_auditor import oracle_audit

DEFAULT_SEED = 1729


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _seed(text):
    if text == "random":
        return int(np.random.SeedSequence().generate_state(1)[0])
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected an integer or 'random'") from None


def _positive(kind):
    def parse(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}") from None
        if v <= 0:
            raise argparse.ArgumentTypeError("must be positive")
        return v

    return parse


def _unit(text):
    v = _positive(float)(text)
    if v >= 1:
        raise argparse.ArgumentTypeError("must lie in (0, 1)")
    return v


def build_parser():
    p = _Parser(prog="fairaudit", description="Manipulation-proof demographic parity audits.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("audit", help="audit a hidden member of a finite class")
    a.add_argument("--method", required=True, choices=["iid", "cal", "minimax", "oracle"])
    a.add_argument("--class", dest="class_file", required=True)
    a.add_argument("--target", type=int, help="index of the hidden hypothesis")
    a.add_argument("--remote", metavar="URL", help="query a model server instead of --target")
    a.add_argument("--eps", type=_unit, required=True)
    a.add_argument("--delta", type=_unit, default=0.1)
    a.add_argument("--budget", type=int)
    a.add_argument("--seed", type=_seed, default=DEFAULT_SEED)
    a.add_argument("--cal-mode", choices=["checked", "sampled"], default="checked")
    a.add_argument("--trace", action="store_true", help="print one JSON line per oracle-auditor round")
    a.add_argument("--out")

    c = sub.add_parser("cost", help="minimax query cost of a class")
    c.add_argument("--class", dest="class_file", required=True)
    c.add_argument("--eps", type=_unit, required=True)
    c.add_argument("--xtd", action="store_true", help="also report the extended teaching dimension")
    c.add_argument("--out")

    s = sub.add_parser("specset", help="specifying set for a labeling")
    s.add_argument("--class", dest="class_file", required=True)
    s.add_argument("--eps", type=_unit, required=True)
    s.add_argument("--h", required=True, help="hypothesis index or JSON file holding a label list")
    s.add_argument("--mode", choices=["exact", "greedy", "online"], default="exact")
    s.add_argument("--seed", type=_seed, default=DEFAULT_SEED)
    s.add_argument("--out")

    g = sub.add_parser("gaussian", help="positive-rate estimation for linear classifiers")
    g.add_argument("--dim", type=_positive(int), required=True)
    g.add_argument("--eps", type=_unit, required=True)
    src = g.add_mutually_exclusive_group()
    src.add_argument("--model", help="a_1,...,a_d,b")
    src.add_argument("--random", type=_positive(int), metavar="N", help="N random models")
    g.add_argument("--populations", help="JSON file with m0, m1, S0, S1 for a two-group audit")
    g.add_argument("--paper-sign", action="store_true", help="report gamma_0 - gamma_1")
    g.add_argument("--seed", type=_seed, default=DEFAULT_SEED)
    g.add_argument("--out")

    e = sub.add_parser("experiment", help="budgeted comparison of auditors")
    e.add_argument("--config", required=True)
    e.add_argument("--workers", type=_positive(int), default=1)
    e.add_argument("--out", help="overrides the config's output path")

    v = sub.add_parser("serve", help="serve a hidden hypothesis over HTTP")
    v.add_argument("--class", dest="class_file", required=True)
    v.add_argument("--target", type=int, required=True)
    v.add_argument("--host", default="127.0.0.1")
    v.add_argument("--port", type=int, default=8000)
    return p


def _write(path, text):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text)


def _target(C, idx, flag="--target"):
    if idx is None or not 0 <= idx < len(C):
        raise UsageError(f"{flag}: expected an index in [0, {len(C) - 1}]")
    return idx


def cmd_audit(args, out):
    C = load_class(args.class_file)
    if args.budget is not None and args.budget < 0:
        raise UsageError("--budget: must be nonnegative")
    if args.remote:
        from .service.client import RemoteOracle

        oracle = RemoteOracle(args.remote)
        true_mu = None
    else:
        t = _target(C, args.target)
        oracle = CountingOracle.from_class(C, t)
        true_mu = float(C.mus[t])
    print(f"seed = {args.seed}", file=out)
    if args.method == "minimax":
        res = minimax_audit(oracle, C, args.eps, budget=args.budget, table=CostTable.open(C, args.eps))
    elif args.method == "oracle":
        res = oracle_audit(
            oracle, C, args.eps, args.delta, seed=args.seed, budget=args.budget, trace=out if args.trace else None
        )
    elif args.method == "cal":
        res = phased_cal_audit(oracle, C, args.eps, seed=args.seed, mode=args.cal_mode, budget=args.budget)
    else:
        res = iid_audit(oracle, C.domain, args.eps, args.delta, seed=args.seed, budget=args.budget, C=C)
    diam = mp_diameter(C, res.transcript)
    print(f"method = {res.method}", file=out)
    print(f"estimate = {res.estimate:.6f}", file=out)
    print(f"queries = {res.queries}", file=out)
    print(f"truncated = {res.truncated}", file=out)
    print(f"mu-diameter = {diam:.6f}", file=out)
    if true_mu is not None:
        print(f"true mu = {true_mu:.6f}", file=out)
    if args.out:
        blob = {
            "method": res.method,
            "seed": args.seed,
            "eps": args.eps,
            "estimate": res.estimate,
            "queries": res.queries,
            "truncated": res.truncated,
            "diameter": diam,
            "true_mu": true_mu,
            "transcript": [list(e) for e in res.transcript],
        }
        _write(args.out, json.dumps(blob, indent=1) + "\n")


def cmd_cost(args, out):
    C = load_class(args.class_file)
    table = CostTable.open(C, args.eps)
    n_cached = len(table)
    value = cost(C.full(), args.eps, C, table)
    if table.path is not None and len(table) > n_cached:
        table.save()
    print(f"Cost(H) = {value}", file=out)
    blob = {"eps": args.eps, "cost": value}
    if args.xtd:
        blob["xtd"] = xtd(C, args.eps)
        print(f"XTD = {blob['xtd']}", file=out)
    if args.out:
        _write(args.out, json.dumps(blob) + "\n")


def cmd_specset(args, out):
    C = load_class(args.class_file)
    if args.h.lstrip("-").isdigit():
        h = C.labels[_target(C, int(args.h), "--h")]
    else:
        try:
            h = np.asarray(json.loads(Path(args.h).read_text()), dtype=np.int8)
        except (OSError, ValueError) as exc:
            raise UsageError(f"--h: cannot read label file: {exc}") from None
    print(f"seed = {args.seed}", file=out)
    S = sorted(min_specifying_set(h, C, args.eps, mode=args.mode, seed=args.seed))
    print(f"size = {len(S)}", file=out)
    print("set = " + " ".join(map(str, S)), file=out)
    if args.out:
        _write(args.out, json.dumps({"mode": args.mode, "set": S}) + "\n")


def _parse_model(text, d):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError("--model: expected comma-separated numbers") from None
    if len(vals) != d + 1:
        raise UsageError(f"--model: expected {d + 1} numbers (a_1..a_{d}, b), got {len(vals)}")
    return LinearModel(vals[:d], vals[d])


def cmd_gaussian(args, out):
    d = args.dim
    if args.eps >= 0.5:
        raise UsageError("--eps: must lie in (0, 1/2)")
    print(f"seed = {args.seed}", file=out)
    rng = np.random.default_rng(args.seed)
    if args.model:
        models = [_parse_model(args.model, d)]
    else:
        models = [LinearModel(rng.standard_normal(d), rng.standard_normal()) for _ in range(args.random or 1)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["d", "eps", "seed", "gamma_true", "gamma_hat", "abs_err", "queries", "branch"])
    worst = 0.0
    for model in models:
        oracle = CountingOracle(model)
        est = estimate_positive(oracle, d, args.eps)
        truth = model.gamma()
        err = abs(est.gamma_hat - truth)
        worst = max(worst, err)
        w.writerow([d, args.eps, args.seed, f"{truth:.12g}", f"{est.gamma_hat:.12g}", f"{err:.12g}", oracle.count, est.branch])
    if len(models) == 1:
        print(f"gamma_true = {truth:.6f}", file=out)
        print(f"gamma_hat = {est.gamma_hat:.6f}", file=out)
        print(f"queries = {oracle.count}", file=out)
    print(f"models = {len(models)}, max abs_err = {worst:.6g}", file=out)
    if args.populations:
        try:
            pops = GaussianPopulations.from_dict(json.loads(Path(args.populations).read_text()))
        except (KeyError, ValueError) as exc:
            raise UsageError(f"--populations: {exc}") from None
        if pops.d != d:
            raise UsageError(f"--populations: dimension {pops.d} does not match --dim {d}")
        for model in models:
            mu_hat = gaussian_audit(CountingOracle(model), pops, args.eps, paper_sign=args.paper_sign)
            mu_true = analytic_mu(model, pops) * (-1 if args.paper_sign else 1)
            print(f"mu_hat = {mu_hat:.6f}  mu_true = {mu_true:.6f}", file=out)
    if args.out:
        _write(args.out, buf.getvalue())


def cmd_experiment(args, out):
    cfg = ExperimentConfig.from_json(args.config)
    if args.out:
        cfg.output = args.out
    print(f"seed = {cfg.seed}", file=out)
    res = run_experiment(cfg, workers=args.workers)
    print(f"target = {res.target}, true mu = {res.true_mu:.6f}", file=out)
    print(f"{'method':<8} {'budget':>6} {'n':>4} {'diam_med':>9} {'diam_mean':>9} {'avg_err':>8} {'errors':>6}", file=out)
    for r in res.summary:
        if r["n"]:
            print(
                f"{r['method']:<8} {r['budget']:>6} {r['n']:>4} {r['diameter_median']:>9.4f} "
                f"{r['diameter_mean']:>9.4f} {r['avg_error_mean']:>8.4f} {r['errors']:>6}",
                file=out,
            )
        else:
            print(f"{r['method']:<8} {r['budget']:>6} {0:>4} {'-':>9} {'-':>9} {'-':>8} {r['errors']:>6}", file=out)
    if cfg.output:
        print(f"wrote {cfg.output} and {summary_path(cfg.output)}", file=out)


def cmd_serve(args, out):
    from .service.app import serve

    C = load_class(args.class_file)
    t = _target(C, args.target)
    print(f"serving hypothesis {t} of {len(C)} on http://{args.host}:{args.port}", file=out)
    serve(C.labels[t], args.host, args.port)


COMMANDS = {
    "audit": cmd_audit,
    "cost": cmd_cost,
    "specset": cmd_specset,
    "gaussian": cmd_gaussian,
    "experiment": cmd_experiment,
    "serve": cmd_serve,
}


def main(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"error: {exc}", file=err)
        return 1
    except SystemExit as exc:
        # --help
        return int(exc.code or 0)
    except (FairAuditError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=err)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
