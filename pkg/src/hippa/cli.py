"""Command-line front end: single runs, rate sweeps, property checks and a benchmark."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import re
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

import numpy as np

from . import analysis
from .algorithm import GammaSchedule, RunConfig, audit_trajectory, run
from .analysis.rates import INCONCLUSIVE, LINEAR, P_ABOVE_Q, P_BELOW_2, SUPERLINEAR
from .catalogue import UsageError, parse_problem, parse_set, parse_x0
from .core import kappa
from .prox import ProxEvaluationError

logger = logging.getLogger("hippa")

SCHEMA_VERSION = 1
RATE_MARGIN = 0.02
DEGREE_MARGIN = 0.3
TRAJ_COLUMNS = ["k", "gamma", "f", "env", "step_norm", "err_to_min"]
RATE_COLUMNS = ["p", "q", "rho", "gamma_min", "theoretical_bound", "empirical_factor_or_degree", "regime", "pass"]
CHECKS = ("uqc", "line_segment", "differential", "growth", "supercoercivity", "local_strong_convexity",
          "stationarity")


def default_seed() -> int:
    try:
        return int(os.environ.get("HIPPA_SEED", "0"))
    except ValueError:
        raise UsageError("HIPPA_SEED must be an integer") from None


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not serializable: {type(obj).__name__}")


def write_atomic(path: str, text: str) -> None:
    """Write ``text`` (UTF-8, LF) to ``path`` via a temporary file and rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n"


def dump_csv(header: list, rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._=-]+", "_", text).strip("_")


# --- configuration ---------------------------------------------------------

def build_run_config(args) -> RunConfig:
    if args.eps is None or args.p is None:
        raise UsageError("--p and --eps are required")
    kw = {"max_iter": args.max_iter, "inner_tol": args.inner_tol}
    if args.gamma is not None and args.gamma_min is None and args.gamma_max is None:
        return RunConfig.constant(args.p, args.gamma, args.eps, **kw)
    if args.gamma_min is None or args.gamma_max is None:
        raise UsageError("give --gamma, or both --gamma-min and --gamma-max")
    if args.schedule == "uniform_random":
        sched = GammaSchedule("uniform_random", seed=args.seed)
    elif args.schedule == "geometric":
        sched = GammaSchedule("geometric", gamma0=args.gamma0 or args.gamma_min, factor=args.factor)
    else:
        sched = GammaSchedule("constant", args.gamma)
    try:
        return RunConfig(args.p, args.gamma_min, args.gamma_max, args.eps, sched, **kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def run_config_from_dict(d: dict) -> RunConfig:
    s = d["schedule"]
    sched = GammaSchedule(s["kind"], gamma=s.get("gamma"), seed=s.get("seed", 0), gamma0=s.get("gamma0"),
                          factor=s.get("factor", 1.0))
    return RunConfig(d["p"], d["gamma_min"], d["gamma_max"], d["epsilon"], sched, d["max_iter"], d["inner_tol"])


def _x0_norm(text: str) -> Optional[float]:
    try:
        return float(np.linalg.norm([float(t) for t in text.split(",")]))
    except ValueError:
        return 1.0 if text == "ones" else None


def assemble(problem: str, set_text: str, x0_text: str):
    x0_norm = _x0_norm(x0_text)
    f = parse_problem(problem, x0_norm)
    if x0_text == "ones" and f.dim:
        f = parse_problem(problem, float(np.sqrt(f.dim)))
    C = parse_set(set_text, f.dim)
    x0 = parse_x0(x0_text, f)
    return f, C, x0


# --- run -------------------------------------------------------------------

def trajectory_rows(traj, xbar) -> list:
    rows = []
    n = len(traj.iterates)
    for k in range(n):
        step = k < len(traj.step_norms)
        err = None if xbar is None else float(np.linalg.norm(traj.iterates[k] - xbar))
        rows.append([k, traj.gammas[k] if step else None, traj.f_values[k],
                     traj.env_values[k] if step else None, traj.step_norms[k] if step else None, err])
    return rows


def execute_run(problem: str, set_text: str, x0_text: str, cfg_dict: dict, seed: int) -> dict:
    """One audited run; returns everything needed to write its files."""
    f, C, x0 = assemble(problem, set_text, x0_text)
    cfg = run_config_from_dict(cfg_dict)
    traj = run(f, C, cfg, x0)
    audit = audit_trajectory(traj, cfg, f)
    xbar = f.known_minimizer
    rate = None
    if xbar is not None:
        rate = analysis.estimate_rate(traj, xbar).to_dict()
    summary = {
        "schema_version": SCHEMA_VERSION,
        "config": {"problem": problem, "set": C.describe(), "x0": x0.tolist(), "run": cfg.describe(),
                   "seed": seed, "modulus": None if f.modulus is None else
                   {"rho": f.modulus.rho, "q": f.modulus.q, "interval": f.modulus.interval,
                    "radius": f.modulus.radius}},
        "label": f.label,
        "stop_reason": traj.stop_reason,
        "error": traj.error,
        "iterations": traj.iterations,
        "final_iterate": traj.final.tolist(),
        "final_f": traj.f_values[-1],
        "final_error": None if xbar is None else float(np.linalg.norm(traj.final - xbar)),
        "rate": rate,
        "audit": audit.to_dict(),
    }
    return {"summary": summary, "rows": trajectory_rows(traj, xbar),
            "errors": None if xbar is None else traj.errors(xbar).tolist(), "passed": audit.passed,
            "warnings": audit.warnings, "wall_time": traj.wall_time}


def cmd_run(args) -> int:
    cfg = build_run_config(args)
    out = execute_run(args.problem, args.set, args.x0, cfg.describe(), args.seed)
    run_id = args.run_id or slug(f"{args.problem}_p{args.p:g}")
    base = os.path.join(args.out, run_id)
    write_atomic(os.path.join(base, "traj.csv"), dump_csv(TRAJ_COLUMNS, out["rows"]))
    write_atomic(os.path.join(base, "summary.json"), dump_json(out["summary"]))
    for w in out["warnings"]:
        logger.warning(w)
    s = out["summary"]
    print(f"{run_id}: {s['stop_reason']} after {s['iterations']} iterations, "
          f"final error {_fmt(s['final_error']) or 'n/a'}, audit {'pass' if out['passed'] else 'FAIL'}")
    if s["rate"] is not None:
        r = s["rate"]
        print(f"  rate: {r['regime']} factor={_fmt(r['linear_factor'])} degree={_fmt(r['superlinear_degree'])}")
    return 0 if out["passed"] else 1


# --- rates -----------------------------------------------------------------

def rate_row(problem, set_text, x0_text, cfg_dict, seed, allow) -> dict:
    out = execute_run(problem, set_text, x0_text, cfg_dict, seed)
    f, _, _ = assemble(problem, set_text, x0_text)
    cfg = run_config_from_dict(cfg_dict)
    p = cfg.p
    mod = f.modulus
    if mod is None:
        raise UsageError(f"{f.label} has no declared modulus; rates are undefined")
    q, rho = mod.q, mod.rho
    rate = out["summary"]["rate"] or {"regime": INCONCLUSIVE}
    bound, empirical, passed = None, None, None
    try:
        case = analysis.classify_case(p, q)
        sigma = None
        if case == P_BELOW_2:
            traj_err = np.asarray(out["errors"])
            sigma = kappa(p) * (2 * traj_err.max()) ** (p - 2) / 2
        bound = analysis.theoretical_rate(case, p, q, rho, cfg.gamma_min, sigma)
    except ValueError as exc:
        if not allow:
            raise UsageError(f"p={p:g}, q={q:g}: {exc} (use --allow-unguaranteed)") from None
        case = None
    if case == P_ABOVE_Q:
        empirical = rate.get("superlinear_degree")
        if bound is not None:
            passed = rate["regime"] == SUPERLINEAR and empirical is not None and abs(empirical - bound) <= DEGREE_MARGIN
    else:
        empirical = rate.get("linear_factor")
        if bound is not None:
            ok_regime = rate["regime"] in (LINEAR, SUPERLINEAR) or case == P_BELOW_2
            passed = ok_regime and empirical is not None and empirical <= bound + RATE_MARGIN
    return {"row": [p, q, rho, cfg.gamma_min, bound, empirical, rate["regime"], passed],
            "errors": out["errors"], "passed": passed}


def _sweep_values(text: str) -> list:
    vals = [float(t) for t in text.split(",") if t.strip()]
    if not vals:
        raise UsageError("empty sweep")
    return vals


def cmd_rates(args) -> int:
    ps = _sweep_values(args.p_list)
    base = build_run_config(argparse.Namespace(**{**vars(args), "p": ps[0]}))
    jobs = []
    for p in ps:
        d = base.describe()
        d["p"] = p
        run_config_from_dict(d)
        jobs.append((args.problem, args.set, args.x0, d, args.seed, args.allow_unguaranteed))
    results = _map(rate_row, jobs, args.jobs)
    rows = [r["row"] for r in results]
    write_atomic(os.path.join(args.out, "rates.csv"), dump_csv(RATE_COLUMNS, rows))
    for p, r in zip(ps, results):
        series = "".join(f"{k} {_fmt(e)}\n" for k, e in enumerate(r["errors"] or []))
        write_atomic(os.path.join(args.out, "series", slug(f"p{p:g}") + ".txt"), series)
    for row in rows:
        print(",".join(_fmt(v) for v in row))
    return 0 if all(r["passed"] is not False for r in results) else 1


# --- check -----------------------------------------------------------------

def run_check(name: str, f, C, args):
    seed, n = args.seed, args.samples
    if name == "uqc":
        return analysis.check_uniform_quasiconvexity(f, n_samples=n, seed=seed)
    if name == "line_segment":
        y = f.known_minimizer if f.known_minimizer is not None else np.zeros(f.dim)
        x = parse_x0(args.x, f) if args.x else y + 1.0
        return analysis.check_line_segment(f, x, y)
    if name == "differential":
        return analysis.check_differential(f, n_samples=min(n, 5000), seed=seed)
    if name == "growth":
        return analysis.check_growth(f, n_samples=min(n, 5000), seed=seed)
    if name == "supercoercivity":
        return analysis.check_supercoercivity(f, m=args.m, seed=seed)
    if name == "local_strong_convexity":
        return analysis.check_local_strong_convexity(f)
    x = parse_x0(args.x, f) if args.x else f.known_minimizer
    return analysis.check_stationarity(f, C, x, seed=seed)


def cmd_check(args) -> int:
    names = list(dict.fromkeys(args.checks))
    for n in names:
        if n not in CHECKS:
            raise UsageError(f"unknown check {n!r}; choose from {', '.join(CHECKS)}")
    f = parse_problem(args.problem)
    C = parse_set(args.set, f.dim)
    expect_fail = f.quasiconvex is False or args.expect_fail
    reports, ok = [], True
    for n in names:
        try:
            rep = run_check(n, f, C, args)
        except NotImplementedError as exc:
            raise UsageError(str(exc)) from None
        good = (not rep.passed) if expect_fail else rep.passed
        ok &= good
        d = rep.to_dict()
        d["expected"] = "fail" if expect_fail else "pass"
        reports.append(d)
        verdict = "pass" if rep.passed else "fail"
        print(f"{n}: {verdict} (expected {d['expected']}, {rep.samples} samples)")
        if rep.witness is not None:
            print(f"  witness: {json.dumps(rep.witness, default=_jsonable)}")
    payload = {"schema_version": SCHEMA_VERSION, "problem": args.problem, "seed": args.seed,
               "samples": args.samples, "checks": reports}
    write_atomic(os.path.join(args.out, "checks.json"), dump_json(payload))
    return 0 if ok else 1


# --- bench -----------------------------------------------------------------

BENCH = [
    ("norm_power:q=2,dim=50", 2.0, 1.0),
    ("norm_power:q=2,dim=50", 3.0, 1.0),
    ("norm_power:q=4,dim=10", 4.0, 64.0),
    ("norm_power:q=2,dim=2", 1.5, 1.0),
    ("quotient:dim=2,g=2", 2.0, 1.0),
]


def bench_row(problem, p, gamma, eps, seed):
    cfg = RunConfig.constant(p, gamma, eps)
    out = execute_run(problem, "whole", "ones", cfg.describe(), seed)
    s = out["summary"]
    return [problem, p, gamma, s["iterations"], s["stop_reason"], s["final_error"], out["passed"]], out["wall_time"]


def cmd_bench(args) -> int:
    jobs = [(prob, p, g, args.eps, args.seed) for prob, p, g in BENCH]
    results = _map(bench_row, jobs, args.jobs)
    rows = [r[0] for r in results]
    write_atomic(os.path.join(args.out, "bench.csv"),
                 dump_csv(["problem", "p", "gamma", "iterations", "stop_reason", "final_error", "audit_pass"], rows))
    for row, (_, wall) in zip(rows, results):
        print(f"{row[0]} p={row[1]:g}: {row[3]} iterations, {wall:.3f}s", file=sys.stderr)
    return 0


# --- plumbing --------------------------------------------------------------

def _call(packed):
    fn, a = packed
    return fn(*a)


def _map(fn, jobs, n_jobs):
    if n_jobs and n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            return list(ex.map(_call, [(fn, j) for j in jobs]))
    return [fn(*j) for j in jobs]


def _add_run_options(sp, need_p=True):
    sp.add_argument("--problem", default="norm_power:q=2,dim=2")
    sp.add_argument("--set", default="whole")
    if need_p:
        sp.add_argument("--p", type=float)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--gamma-min", type=float)
    sp.add_argument("--gamma-max", type=float)
    sp.add_argument("--schedule", choices=["constant", "uniform_random", "geometric"], default="constant")
    sp.add_argument("--gamma0", type=float)
    sp.add_argument("--factor", type=float, default=1.0)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--max-iter", type=int, default=1_000_000)
    sp.add_argument("--inner-tol", type=float)
    sp.add_argument("--x0", default="ones")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hippa", description=__doc__)
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file of option defaults; flags override it")
        sp.add_argument("--seed", type=int, default=None, help="default: $HIPPA_SEED or 0")
        sp.add_argument("--out", default="out")
        sp.add_argument("--jobs", type=int, default=1)

    sp = sub.add_parser("run", help="one audited run")
    _add_run_options(sp)
    sp.add_argument("--run-id")
    common(sp)
    sp.set_defaults(handler=cmd_run)

    sp = sub.add_parser("rates", help="sweep the proximal order and compare rates to their bounds")
    _add_run_options(sp, need_p=False)
    sp.add_argument("--p-list", default="2,3,4")
    sp.add_argument("--allow-unguaranteed", action="store_true")
    common(sp)
    sp.set_defaults(handler=cmd_rates, gamma=None, eps=1e-10)

    sp = sub.add_parser("check", help="sampled property checks")
    sp.add_argument("checks", nargs="+")
    sp.add_argument("--problem", default="norm_power:q=2,dim=2")
    sp.add_argument("--set", default="whole")
    sp.add_argument("--samples", type=int, default=10_000)
    sp.add_argument("--m", type=float, default=2.0)
    sp.add_argument("--x", help="evaluation point (stationarity, line-segment end)")
    sp.add_argument("--expect-fail", action="store_true")
    common(sp)
    sp.set_defaults(handler=cmd_check)

    sp = sub.add_parser("bench", help="fixed benchmark of representative runs")
    sp.add_argument("--eps", type=float, default=1e-8)
    common(sp)
    sp.set_defaults(handler=cmd_bench)
    return parser


def _apply_config(parser, argv):
    pre = parser.parse_args(argv)
    if getattr(pre, "config", None):
        try:
            with open(pre.config, encoding="utf-8") as fh:
                conf = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {pre.config}: {exc}") from None
        if not isinstance(conf, dict):
            raise UsageError("config file must hold a JSON object")
        sub = parser._subparsers._group_actions[0].choices[pre.command]
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in conf.items()})
        pre = parser.parse_args(argv)
    return pre


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
        if args.seed is None:
            args.seed = default_seed()
        if args.command == "rates" and args.gamma is None and args.gamma_min is None:
            args.gamma = 1.0
        if args.command == "run" and args.gamma is None and args.gamma_min is None:
            args.gamma = 1.0
        return args.handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (ProxEvaluationError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
