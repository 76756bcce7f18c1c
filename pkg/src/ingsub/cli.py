"""Command-line interface: ``ingsub {simulate,estimate,experiment,tables}``.

Exit codes: 0 success, 2 validation error, 3 convergence/estimation
failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import ConvergenceError, DomainError, EstimationError
from .estimators import fracmom_alpha, mle_alpha_from_excess, mle_asymptotic_ci, mom_ting
from .harness import McConfig, emit_table, envelope_check, run_mc, run_table
from .sim import Family, ModelParams, RngStream, sample_excess, sample_path

log = logging.getLogger("ingsub")

EXIT_OK, EXIT_VALIDATION, EXIT_ESTIMATION, EXIT_IO = 0, 2, 3, 4

PATH_COLUMNS = ["family", "alpha", "eps", "theta", "t", "seed", "stream", "value", "jump_count"]
JUMP_COLUMNS = ["family", "alpha", "eps", "theta", "seed", "stream", "jump", "excess"]


def _cell(v):
    if v is None:
        return ""
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _params_from_args(args) -> ModelParams:
    return ModelParams(args.family, args.alpha,
                       eps=args.eps if args.family == "ing-eps" else None,
                       theta=args.theta if args.family == "ting" else None)


def cmd_simulate(args) -> int:
    params = _params_from_args(args)
    rng = RngStream(args.seed, args.stream)
    base = [params.family.value, params.alpha, params.eps, params.theta]
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if args.jumps:
            w.writerow(JUMP_COLUMNS)
            excess = sample_excess(params, rng, args.n)
            for e in excess:
                w.writerow([_cell(v) for v in (*base, args.seed, args.stream, params.lower_bound + e, e)])
        else:
            w.writerow(PATH_COLUMNS)
            for _ in range(args.n):
                path = sample_path(params, args.t, rng)
                w.writerow([_cell(v) for v in (*base, args.t, args.seed, args.stream,
                                                path.value, path.jump_count)])
    log.info("wrote %d rows to %s", args.n, args.out)
    return EXIT_OK


def _read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DomainError(f"{path} contains no observations")
    return rows


def _column(rows, name) -> np.ndarray:
    if name not in rows[0]:
        raise DomainError(f"input is missing column {name!r}")
    return np.array([float(r[name]) for r in rows])


def _from_rows(rows, name, override):
    if override is not None:
        return override
    v = rows[0].get(name, "")
    return float(v) if v not in ("", None) else None


def cmd_estimate(args) -> int:
    rows = _read_rows(args.input)
    family = args.family or rows[0].get("family") or None
    eps = _from_rows(rows, "eps", args.eps)
    if args.estimator == "mle":
        if family not in (None, "ing", "ing-eps"):
            raise DomainError("mle applies to ing / ing-eps jump samples")
        if "excess" in rows[0]:
            excess = _column(rows, "excess")
        else:
            lb = eps if family == "ing-eps" else 1.0
            excess = _column(rows, "jump") - lb
        report = mle_alpha_from_excess(excess, eps=eps if family == "ing-eps" else None)
        report = mle_asymptotic_ci(report, args.level, args.variance_model)
    else:
        t = _from_rows(rows, "t", args.t)
        if t is None:
            raise DomainError("--t is required (no t column in input)")
        values = _column(rows, "value")
        if args.estimator == "mom":
            report = mom_ting(values, t, variance_formula=args.variance_formula)
        else:
            fam = family or "ing"
            report = fracmom_alpha(values, t, p=args.p, family=fam,
                                   eps=eps if fam == "ing-eps" else None)
    text = report.to_json(indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_experiment(args) -> int:
    raw = json.loads(Path(args.config).read_text())
    configs = [McConfig.from_dict(d) for d in (raw if isinstance(raw, list) else [raw])]
    summaries = []
    for c in configs:
        s = run_mc(c, workers=args.workers)
        log.info("%s N=%d: %d ok, %d failed, %.2fs", c.params.family.value, c.sample_size,
                 s.n_ok, s.n_failed, s.wall_clock)
        summaries.append(s)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"summary.{args.format}").write_text(emit_table(summaries, args.format))
    return EXIT_OK


def cmd_tables(args) -> int:
    kw = {"replications": args.replications}
    if args.t is not None:
        kw["t"] = args.t
    summaries = run_table(args.which, args.seed, workers=args.workers, **kw)
    doc = emit_table(summaries, args.format)
    checks = envelope_check(args.which, summaries)
    lines = []
    for c in checks:
        status = "PASS" if c["ok"] else "FAIL"
        lines.append(
            f"[{status}] table {c['table']} point={c['point']} N={c['N']} {c['parameter']}: "
            f"mean {c['mean']:.4f} vs {c['reference_mean']:.4f} +/- {4 * c['reference_mad']:.4f}"
            f" (failed replications: {c['failed_replications']})"
        )
    report = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(doc)
        sys.stdout.write(report)
    else:
        sys.stdout.write(doc + "\n" + report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ingsub", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate path values (or jumps) to CSV")
    s.add_argument("--family", choices=[f.value for f in Family], required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--eps", type=float)
    s.add_argument("--theta", type=float)
    s.add_argument("--t", type=float, default=1.0)
    s.add_argument("--n", type=int, required=True, help="number of paths (or jumps with --jumps)")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--stream", type=int, default=0)
    s.add_argument("--jumps", action="store_true", help="write i.i.d. jumps instead of path values")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="estimate parameters from a CSV of observations")
    e.add_argument("--estimator", choices=["mle", "mom", "fracmom"], required=True)
    e.add_argument("--in", dest="input", required=True)
    e.add_argument("--family", choices=[f.value for f in Family])
    e.add_argument("--eps", type=float)
    e.add_argument("--t", type=float)
    e.add_argument("--p", type=float, default=0.05)
    e.add_argument("--level", type=float, default=0.95)
    e.add_argument("--variance-model", default="fisher", choices=["fisher", "cos2", "cot-log"])
    e.add_argument("--variance-formula", default="density", choices=["density", "alpha-minus-one"])
    e.add_argument("--out")
    e.set_defaults(func=cmd_estimate)

    x = sub.add_parser("experiment", help="run Monte Carlo experiments from a JSON config")
    x.add_argument("--config", required=True)
    x.add_argument("--out-dir", required=True)
    x.add_argument("--format", choices=["csv", "json", "text"], default="csv")
    x.add_argument("--workers", type=int, default=1)
    x.set_defaults(func=cmd_experiment)

    t = sub.add_parser("tables", help="re-run one of the six reference tables")
    t.add_argument("--which", type=int, choices=range(1, 7), required=True)
    t.add_argument("--seed", type=int, required=True)
    t.add_argument("--t", type=float)
    t.add_argument("--replications", type=int, default=100)
    t.add_argument("--workers", type=int, default=1)
    t.add_argument("--format", choices=["csv", "json", "text"], default="text")
    t.add_argument("--out")
    t.set_defaults(func=cmd_tables)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConvergenceError, EstimationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except (DomainError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
