"""Command-line front end.

Subcommands::

    mimc predict         asymptotic work complexity of MLMC, MIMC-FT and MIMC-TD
    mimc run             one adaptive run; writes result JSON and per-index CSV
    mimc sweep           runs over a list of tolerances; CSV plus a slope fit
    mimc rates           pilot sampling along each axis and fitted rates
    mimc appendix-check  verification grid of the simplex-integral formulas

Exit codes: 0 success, 1 usage error, 2 non-convergence, 3 internal error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .estimator import RunConfig, run_mimc, run_mlmc
from .rate_model import (
    RateParameters,
    complexity_class,
    ft_complexity,
    mlmc_complexity,
)
from .statistics import complexity_fit, rate_fit

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED, EXIT_INTERNAL = 0, 1, 2, 3
OUT_DIR_ENV = "MIMC_OUT_DIR"
METHODS = ("mlmc", "mimc-ft", "mimc-td", "mimc-profit")
PROBLEMS = ("synthetic", "elliptic")

log = logging.getLogger("mimc")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(x) -> str:
    return f"{x:.17g}" if isinstance(x, float) else str(x)


def _dump_json(obj) -> str:
    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(type(o))

    # json writes floats with repr, i.e. shortest round-trip (17 digits max)
    return json.dumps(obj, indent=2, default=default, allow_nan=True)


# ---------------------------------------------------------------------------
# configuration plumbing


def _load(args) -> dict:
    conf = cfgmod.load_config(args.config) if args.config else {}
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        conf[k.strip()] = cfgmod.parse_value(v)
    return conf


def _first(*values):
    for v in values:
        if v is not None:
            return v
    return None


def rates_from_config(conf: dict, d_default=None) -> RateParameters:
    r = cfgmod.section(conf, "rates")
    missing = [k for k in ("w", "s", "gamma") if k not in r]
    if missing:
        raise UsageError(f"rates config is missing {', '.join('rates.' + m for m in missing)}")
    lens = [len(v) for v in r.values() if isinstance(v, list)]
    d = int(r.get("d", lens[0] if lens else (d_default or 1)))
    try:
        return RateParameters(
            d=d,
            beta=r.get("beta", 2.0),
            w=r["w"],
            s=r["s"],
            gamma=r["gamma"],
            Q_W=float(r.get("Q_W", 1.0)),
            Q_S=float(r.get("Q_S", 1.0)),
            C_work=float(r.get("C_work", 1.0)),
        )
    except ValueError as exc:
        raise UsageError(f"invalid rates: {exc}") from exc


def _dataclass_kwargs(cls, values: dict) -> dict:
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise UsageError(f"unknown problem keys: {', '.join(sorted(unknown))}")
    out = {}
    for k, v in values.items():
        out[k] = tuple(v) if isinstance(v, list) else v
    return out


def build_problem(name: str, conf: dict):
    """Return ``(sampler, rates, exact value or None)``."""
    from .problems.elliptic import REFERENCE_VALUE, EllipticProblemParams, EllipticSampler
    from .problems.synthetic import SyntheticModelParams, SyntheticSampler

    values = {k: v for k, v in cfgmod.section(conf, "problem").items() if k != "name"}
    if name == "synthetic":
        params = SyntheticModelParams(**_dataclass_kwargs(SyntheticModelParams, values))
        sampler = SyntheticSampler(params)
        return sampler, params.rates(), sampler.exact_limit()
    if name == "elliptic":
        params = EllipticProblemParams(**_dataclass_kwargs(EllipticProblemParams, values))
        sampler = EllipticSampler(params)
        rates = (
            rates_from_config(conf, 3)
            if cfgmod.section(conf, "rates")
            else RateParameters(d=3, beta=params.beta, w=2.0, s=4.0, gamma=params.work_exponent)
        )
        return sampler, rates, REFERENCE_VALUE
    raise UsageError(f"unknown problem {name!r}")


def run_config(args, conf: dict, tol: float, seed: int) -> RunConfig:
    e = cfgmod.section(conf, "estimator")
    method = _first(args.method, e.get("method"), "mimc-td")
    if method not in METHODS:
        raise UsageError(f"unknown method {method!r}")
    delta = e.get("delta")
    try:
        return RunConfig(
            tol=tol,
            eps=float(_first(args.eps, e.get("eps"), 0.05)),
            theta=float(_first(args.theta, e.get("theta"), 0.5)),
            m0=int(e.get("m0", 5)),
            policy=method,
            delta=[float(x) for x in delta] if isinstance(delta, list) else delta,
            r=float(e.get("r", 2.0)),
            stages=int(e.get("stages", 4)),
            seed=seed,
            workers=int(_first(args.workers, e.get("workers"), 1)),
            max_iter=int(e.get("max_iter", 60)),
            chunk_size=int(e.get("chunk_size", 256)),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _execute(config: RunConfig, sampler, rates):
    if config.policy == "mlmc":
        return run_mlmc(config, sampler)
    return run_mimc(config, sampler, rates=rates)


def _out_dir(args) -> Path:
    path = Path(args.out_dir or os.environ.get(OUT_DIR_ENV) or ".")
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# subcommands


def predict_reports(rates: RateParameters, theta: float = 0.5, eps: float = 0.05) -> dict:
    out = {"rates": rates.to_dict()}
    try:
        out["MLMC"] = mlmc_complexity(rates).to_dict()
    except ValueError as exc:
        out["MLMC"] = {"method": "MLMC", "applicable": False, "violated_condition": str(exc)}
    out["MIMC-FT"] = ft_complexity(rates, theta).to_dict()
    out["MIMC-TD"] = complexity_class(rates, None, theta, eps).to_dict()
    return out


def cmd_predict(args) -> int:
    conf = _load(args)
    rates = rates_from_config(conf)
    theta = float(_first(args.theta, 0.5))
    eps = float(_first(args.eps, 0.05))
    report = predict_reports(rates, theta, eps)
    text = _dump_json(report)
    print(text)
    if args.out_dir or os.environ.get(OUT_DIR_ENV):
        (_out_dir(args) / "predict.json").write_text(text + "\n")
    return EXIT_OK


def cmd_run(args) -> int:
    conf = _load(args)
    tol = _first(args.tol, cfgmod.section(conf, "estimator").get("tol"))
    if tol is None or not float(tol) > 0:
        raise UsageError("a positive --tol is required")
    problem = _first(args.problem, conf.get("problem.name"), "synthetic")
    sampler, rates, exact = build_problem(problem, conf)
    config = run_config(args, conf, float(tol), int(_first(args.seed, 0)))
    result = _execute(config, sampler, rates)
    out = _out_dir(args)
    payload = result.to_dict(include_timing=not args.no_timing)
    payload["problem"] = problem
    if exact is not None:
        payload["reference"] = exact
        payload["error"] = result.estimate - exact
    (out / "result.json").write_text(_dump_json(payload) + "\n")
    (out / "result.csv").write_text(result.to_csv())
    print(f"estimate {_fmt(result.estimate)}  bias {result.bias:.3e}  "
          f"stat {result.stat_error:.3e}  work {result.total_work:.3e}  converged {result.converged}")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_sweep(args) -> int:
    conf = _load(args)
    tols = args.tols or cfgmod.section(conf, "sweep").get("tols")
    if not isinstance(tols, list) or len(tols) < 2:
        raise UsageError("sweep needs at least two tolerances (--tols)")
    tols = sorted((float(t) for t in tols), reverse=True)
    problem = _first(args.problem, conf.get("problem.name"), "synthetic")
    sampler, rates, exact = build_problem(problem, conf)
    seed0 = int(_first(args.seed, 0))
    rows = []
    for i, tol in enumerate(tols):
        for rep in range(args.reps):
            config = run_config(args, conf, tol, seed0 + 1000 * i + rep)
            try:
                res = _execute(config, sampler, rates)
                err = res.estimate - exact if exact is not None else float("nan")
                rows.append({"tol": tol, "rep": rep, "work": res.total_work, "wall_time": res.wall_time,
                             "error": err, "max_dof": res.max_dof, "converged": res.converged, "failed": False})
            except Exception as exc:  # one failed cell must not stop the sweep
                log.error("tol %g rep %d failed: %s", tol, rep, exc)
                rows.append({"tol": tol, "rep": rep, "work": float("nan"), "wall_time": float("nan"),
                             "error": float("nan"), "max_dof": float("nan"), "converged": False, "failed": True})
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]))
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(v) for k, v in row.items()})
    good = [(r["tol"], r["work"]) for r in rows if not r["failed"]]
    summary = {"n_rows": len(rows), "n_failed": sum(r["failed"] for r in rows)}
    try:
        summary["complexity_fit"] = complexity_fit(good).to_dict()
    except ValueError as exc:
        summary["complexity_fit"] = {"error": str(exc)}
    out = _out_dir(args)
    (out / "sweep.csv").write_text(buf.getvalue())
    (out / "sweep_summary.json").write_text(_dump_json(summary) + "\n")
    sys.stdout.write(buf.getvalue())
    print(_dump_json(summary))
    return EXIT_OK if not summary["n_failed"] and all(r["converged"] for r in rows) else EXIT_NOT_CONVERGED


def pilot_rates(sampler, levels, samples: int, seed: int = 0) -> dict:
    """Per-axis fits of mean, variance and work of differences at ``l e_i``."""
    d = sampler.d
    ids = np.arange(samples, dtype=np.uint64)
    out = {"levels": list(levels), "samples": samples, "directions": []}
    for i in range(d):
        means, variances, works, table = [], [], [], []
        for lev in levels:
            alpha = tuple(lev if j == i else 0 for j in range(d))
            y, w = sampler.evaluate_batch(alpha, ids, seed)
            m, v = float(np.mean(y)), float(np.var(y, ddof=1))
            means.append((lev, abs(m)))
            variances.append((lev, v))
            works.append((lev, float(w)))
            table.append({"alpha": list(alpha), "mean": m, "variance": v, "work": float(w)})
        entry = {"direction": i + 1, "table": table}
        for name, pairs, sign in (("w", means, -1), ("s", variances, -1), ("gamma", works, 1)):
            try:
                fit = rate_fit(pairs, 2.0)
                entry[name] = sign * fit.slope
                entry[name + "_fit"] = fit.to_dict()
            except ValueError as exc:
                entry[name] = None
                entry[name + "_fit"] = {"degenerate": str(exc)}
        out["directions"].append(entry)
    return out


def cmd_rates(args) -> int:
    conf = _load(args)
    problem = _first(args.problem, conf.get("problem.name"), "synthetic")
    sampler, _, _ = build_problem(problem, conf)
    levels = args.levels or [1, 2, 3, 4]
    if len(levels) < 3:
        raise UsageError("rate fits need at least 3 levels")
    report = pilot_rates(sampler, levels, args.samples, int(_first(args.seed, 0)))
    text = _dump_json(report)
    print(text)
    (_out_dir(args) / "rates.json").write_text(text + "\n")
    return EXIT_OK


def cmd_appendix_check(args) -> int:
    from .verification import appendix_grid, rows_to_csv, straddle_rows

    rows = appendix_grid() + straddle_rows()
    text = rows_to_csv(rows)
    if args.out_dir or os.environ.get(OUT_DIR_ENV):
        (_out_dir(args) / "appendix_check.csv").write_text(text)
    sys.stdout.write(text)
    bad = [r for r in rows if not r.passed]
    for r in bad:
        print(f"FAILED {r.check} d={r.d} a=[{r.a}] L={r.L} slack={r.slack:.3e}", file=sys.stderr)
    return EXIT_OK if not bad else EXIT_INTERNAL


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    common.add_argument("--tol", type=float)
    common.add_argument("--eps", type=float)
    common.add_argument("--theta", type=float)
    common.add_argument("--method", choices=METHODS)
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--out-dir", help=f"output directory (default ${OUT_DIR_ENV} or .)")
    common.add_argument("--problem", choices=PROBLEMS)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="mimc", description="Multi-index Monte Carlo toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("predict", parents=[common], help="complexity of MLMC / MIMC-FT / MIMC-TD")
    p = sub.add_parser("run", parents=[common], help="one adaptive run")
    p.add_argument("--no-timing", action="store_true", help="omit wall time from the JSON")
    p = sub.add_parser("sweep", parents=[common], help="runs over several tolerances")
    p.add_argument("--tols", type=float, nargs="+")
    p.add_argument("--reps", type=int, default=1)
    p = sub.add_parser("rates", parents=[common], help="pilot rate estimation")
    p.add_argument("--levels", type=int, nargs="+")
    p.add_argument("--samples", type=int, default=1000)
    sub.add_parser("appendix-check", parents=[common], help="simplex-integral verification grid")
    return parser


COMMANDS = {
    "predict": cmd_predict,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "rates": cmd_rates,
    "appendix-check": cmd_appendix_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.eps is not None and not 0 < args.eps < 1:
        parser.error("--eps must lie in (0, 1)")
    if args.theta is not None and not 0 < args.theta < 1:
        parser.error("--theta must lie in (0, 1)")
    if args.tol is not None and not args.tol > 0:
        parser.error("--tol must be positive")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, cfgmod.ConfigError) as exc:
        print(f"mimc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AssertionError as exc:
        print(f"mimc: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
