"""Monte Carlo experiments: replicate simulate-then-estimate, summarize, tabulate."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable

import numpy as np

from .errors import DomainError, EstimationError, IngsubError
from .estimators import fracmom_alpha, mle_alpha_from_excess, mom_ting
from .sim import Family, ModelParams, RngStream, sample_excess, sample_values

__all__ = [
    "McConfig",
    "McSummary",
    "ExperimentFailed",
    "run_mc",
    "summarize",
    "emit_table",
    "REFERENCE_TABLES",
    "table_configs",
    "run_table",
    "envelope_check",
]

log = logging.getLogger(__name__)

ESTIMATORS = ("mle", "mom", "fracmom")
_COMPATIBLE = {
    "mle": (Family.ING, Family.ING_EPS),
    "mom": (Family.TING,),
    "fracmom": (Family.ING, Family.ING_EPS),
}
MAX_FAILURE_FRACTION = 0.10


class ExperimentFailed(EstimationError):
    """More than 10% of replications raised."""

    def __init__(self, msg, summary):
        super().__init__(msg)
        self.summary = summary


@dataclass(frozen=True)
class McConfig:
    """One Monte Carlo cell: model, horizon, sample size, replications, estimator.

    ``options`` is passed through to the estimator (``p`` for fracmom,
    ``variance_formula`` / ``init`` for mom). For ``mle`` each replication
    draws ``sample_size`` jumps; otherwise ``sample_size`` path values S(t).
    """

    params: ModelParams
    t: float
    sample_size: int
    replications: int = 100
    estimator: str = "mom"
    seed: int = 0
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise DomainError(f"unknown estimator {self.estimator!r}; choose from {ESTIMATORS}")
        if self.params.family not in _COMPATIBLE[self.estimator]:
            raise DomainError(f"estimator {self.estimator} does not apply to family {self.params.family.value}")
        if self.sample_size < 1 or self.replications < 1:
            raise DomainError("sample_size and replications must be >= 1")
        if not (self.t > 0):
            raise DomainError("t must be > 0")

    @property
    def targets(self) -> dict[str, float]:
        return self.params.free_parameters() if self.estimator == "mom" else {"alpha": self.params.alpha}

    def to_dict(self) -> dict:
        d = self.params.to_dict()
        d.update(t=self.t, sample_size=self.sample_size, replications=self.replications,
                 estimator=self.estimator, seed=self.seed, options=dict(self.options))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> McConfig:
        try:
            return cls(
                params=ModelParams.from_dict(d),
                t=float(d.get("t", 1.0)),
                sample_size=int(d["sample_size"]),
                replications=int(d.get("replications", 100)),
                estimator=d.get("estimator", "mom"),
                seed=int(d.get("seed", 0)),
                options=dict(d.get("options", {})),
            )
        except KeyError as e:
            raise DomainError(f"config is missing field {e.args[0]!r}") from None


@dataclass
class McSummary:
    """Per-parameter mean / MAD / MSE of replicated estimates."""

    rows: dict[str, dict[str, float]]
    truth: dict[str, float]
    estimates: np.ndarray
    config: McConfig | None = None
    n_failed: int = 0
    failures: list[tuple[int, str]] = field(default_factory=list)
    wall_clock: float = 0.0

    @property
    def n_ok(self) -> int:
        return int(self.estimates.shape[0])

    @property
    def failed(self) -> bool:
        total = self.n_ok + self.n_failed
        return total == 0 or self.n_failed > MAX_FAILURE_FRACTION * total


def summarize(estimates, truth) -> McSummary:
    """Mean, mean absolute deviation and mean squared error against ``truth``.

    ``estimates`` is a sequence of dicts keyed by parameter name, or an
    array whose columns follow the order of ``truth``.
    """
    if isinstance(truth, ModelParams):
        truth = truth.free_parameters()
    names = list(truth)
    if len(estimates) == 0:
        raise DomainError("cannot summarize an empty list of estimates")
    if isinstance(estimates[0], dict):
        arr = np.array([[e[k] for k in names] for e in estimates], dtype=float)
    else:
        arr = np.asarray(estimates, dtype=float).reshape(len(estimates), -1)
    if arr.shape[1] != len(names):
        raise DomainError(f"estimates have {arr.shape[1]} columns, truth has {len(names)}")
    rows = {}
    for j, k in enumerate(names):
        dev = arr[:, j] - truth[k]
        mad = float(np.mean(np.abs(dev)))
        mse = float(np.mean(dev * dev))
        assert mse <= float(np.max(np.abs(dev))) * mad * (1 + 1e-12) + 1e-300
        rows[k] = {"mean": float(np.mean(arr[:, j])), "mad": mad, "mse": mse}
    return McSummary(rows=rows, truth=dict(truth), estimates=arr)


def _simulate(config: McConfig, rng: RngStream) -> np.ndarray:
    if config.estimator == "mle":
        return sample_excess(config.params, rng, config.sample_size)
    return sample_values(config.params, config.t, rng, config.sample_size)


def _estimate(config: McConfig, data: np.ndarray) -> dict[str, float]:
    opts = config.options
    if config.estimator == "mle":
        return mle_alpha_from_excess(data, eps=config.params.eps).point
    if config.estimator == "mom":
        return mom_ting(data, config.t, init=opts.get("init"),
                        variance_formula=opts.get("variance_formula", "density")).point
    return fracmom_alpha(data, config.t, p=opts.get("p", 0.05),
                         family=config.params.family, eps=config.params.eps).point


def _replicate(config: McConfig, r: int, estimate: Callable | None = None):
    rng = RngStream(config.seed, r)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            data = _simulate(config, rng)
            point = (estimate or _estimate)(config, data)
            return r, [float(point[k]) for k in config.targets], None
        except IngsubError as e:
            return r, None, f"{type(e).__name__}: {e}"


def run_mc(config: McConfig, workers: int = 1, estimate: Callable | None = None,
           strict: bool = True) -> McSummary:
    """Run ``config.replications`` independent replications and summarize.

    Replication ``r`` (1-based) draws from ``RngStream(config.seed, r)``, so the
    result does not depend on ``workers``. ``estimate(config, data)`` may
    replace the configured estimator (it must be picklable when workers > 1).

    Raises
    ------
    ExperimentFailed
        If ``strict`` and more than 10% of replications raised.
    """
    t0 = time.perf_counter()
    reps = range(1, config.replications + 1)
    job = partial(_replicate, config, estimate=estimate)
    if workers > 1:
        chunk = max(1, config.replications // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, reps, chunksize=chunk))
    else:
        results = [job(r) for r in reps]
    results.sort(key=lambda x: x[0])
    ok = [vals for _, vals, err in results if err is None]
    failures = [(r, err) for r, _, err in results if err is not None]
    truth = config.targets
    if ok:
        summary = summarize(ok, truth)
    else:
        summary = McSummary(rows={k: {"mean": math.nan, "mad": math.nan, "mse": math.nan} for k in truth},
                            truth=truth, estimates=np.empty((0, len(truth))))
    summary.config = config
    summary.n_failed = len(failures)
    summary.failures = failures
    summary.wall_clock = time.perf_counter() - t0
    if failures:
        log.warning("%d of %d replications failed (first: %s)", len(failures), len(results), failures[0][1])
    if strict and summary.failed:
        raise ExperimentFailed(
            f"{len(failures)} of {len(results)} replications failed (> {MAX_FAILURE_FRACTION:.0%})", summary)
    return summary


# ---------------------------------------------------------------- tables

_FIXED_COLUMNS = ["family", "alpha", "eps", "theta", "t", "estimator", "parameter"]


def _group_key(s: McSummary):
    c = s.config
    if c is None:
        return ("", None, None, None, None, "")
    p = c.params
    return (p.family.value, p.alpha, p.eps, p.theta, c.t, c.estimator)


def _table_rows(summaries: list[McSummary]):
    sizes = sorted({s.config.sample_size for s in summaries if s.config is not None})
    groups: dict = {}
    for s in summaries:
        groups.setdefault(_group_key(s), {})[s.config.sample_size if s.config else 0] = s
    rows = []
    for key, by_n in groups.items():
        params = next(iter(by_n.values())).rows.keys()
        for name in params:
            row = dict(zip(_FIXED_COLUMNS, (*key, name)))
            for n in sizes:
                s = by_n.get(n)
                cell = s.rows[name] if s is not None else {}
                for stat in ("mean", "mad", "mse"):
                    row[f"{stat}_N{n}"] = cell.get(stat)
            rows.append(row)
    return sizes, rows


def _fmt_csv(v):
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else str(v)


def emit_table(summaries: list[McSummary], fmt: str = "csv") -> str:
    """Render summaries in the Mean / MAD / MSE per-N column layout.

    One row per (parameter point, estimated parameter); column groups per
    sample size N in ascending order. ``csv`` and ``json`` carry full double
    precision, ``text`` is fixed-width with 4 decimals.
    """
    if fmt not in ("csv", "json", "text"):
        raise DomainError(f"unknown table format {fmt!r}")
    sizes, rows = _table_rows(summaries)
    columns = _FIXED_COLUMNS + [f"{stat}_N{n}" for n in sizes for stat in ("mean", "mad", "mse")]
    if fmt == "json":
        return json.dumps(rows, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt_csv(row[c]) for c in columns])
        return buf.getvalue()
    return _text_table(sizes, rows)


def _num(v, fmt):
    return "" if v is None else format(v, fmt)


def _text_table(sizes, rows) -> str:
    head = f"{'family':<8}{'alpha':>7}{'eps':>7}{'theta':>7}{'t':>8}  {'param':<6}"
    groups = "".join(f" | {f'N={n}':^28}" for n in sizes)
    sub = " " * len(head) + "".join(f" | {'Mean':>8} {'MAD':>8} {'MSE':>10}" for _ in sizes)
    lines = [head + groups, sub]
    for r in rows:
        line = (f"{r['family']:<8}{_num(r['alpha'], '.4g'):>7}{_num(r['eps'], '.4g'):>7}"
                f"{_num(r['theta'], '.4g'):>7}{_num(r['t'], '.6g'):>8}  {r['parameter']:<6}")
        for n in sizes:
            line += (f" | {_num(r[f'mean_N{n}'], '.4f'):>8} {_num(r[f'mad_N{n}'], '.4f'):>8}"
                     f" {_num(r[f'mse_N{n}'], '.4g'):>10}")
        lines.append(line)
    return "\n".join(lines) + "\n"


# Reference Mean, MAD, MSE per N for each parameter of the six experiment tables.
REFERENCE_TABLES = {
    1: {"family": "ting", "estimator": "mom", "sizes": (100, 500, 1000), "cells": {
        (0.1, 0.2): {"alpha": [(0.1325, 0.0109, 0.000177), (0.1312, 0.0093, 0.0001321), (0.1313, 0.0096, 0.0001436)],
                     "theta": [(0.2026, 0.0120, 0.000214), (0.2018, 0.0104, 0.000166), (0.2020, 0.0106, 0.00017)]}}},
    2: {"family": "ting", "estimator": "mom", "sizes": (100, 500, 1000), "cells": {
        (0.5, 0.4): {"alpha": [(0.5730, 0.0298, 0.0013), (0.5710, 0.0283, 0.0012), (0.5691, 0.0291, 0.0013)],
                     "theta": [(0.3846, 0.0114, 0.000198), (0.3843, 0.0108, 0.00018), (0.3846, 0.0113, 0.00029)]}}},
    3: {"family": "ting", "estimator": "mom", "sizes": (100, 500, 1000), "cells": {
        (0.7, 0.5): {"alpha": [(0.7030, 0.0327, 0.0017), (0.7022, 0.0315, 0.0015), (0.7008, 0.0307, 0.0015)],
                     "theta": [(0.4033, 0.0139, 0.000295), (0.4009, 0.0136, 0.000249), (0.4007, 0.0130, 0.000266)]}}},
    # the second parameter of this table is theta
    4: {"family": "ting", "estimator": "mom", "sizes": (100, 500, 1000), "cells": {
        (0.9, 0.7): {"alpha": [(0.9319, 0.0394, 0.0017), (0.9216, 0.0225, 0.0006), (0.9071, 0.0214, 0.0005)],
                     "theta": [(0.6644, 0.0446, 0.0021), (0.6753, 0.0257, 0.0008), (0.6922, 0.0250, 0.0007)]}}},
    5: {"family": "ing", "estimator": "fracmom", "sizes": (50, 100, 250), "cells": {
        (0.3,): {"alpha": [(0.3086, 0.0183, 0.000059), (0.3060, 0.0176, 0.00047), (0.3022, 0.0207, 0.000711)]},
        (0.5,): {"alpha": [(0.5038, 0.0061, 0.000047), (0.5019, 0.0063, 0.000066), (0.5000, 0.0072, 0.000087)]},
        (0.7,): {"alpha": [(0.7059, 0.0126, 0.00033), (0.7037, 0.0120, 0.0002392), (0.7019, 0.0127, 0.000386)]},
        (0.9,): {"alpha": [(0.9086, 0.0071, 0.000107), (0.9064, 0.0114, 0.00024), (0.9054, 0.0094, 0.00016)]}}},
    6: {"family": "ing-eps", "estimator": "fracmom", "sizes": (50, 100, 250), "cells": {
        (0.3,): {"alpha": [(0.3072, 0.0163, 0.00007), (0.3053, 0.0158, 0.00053), (0.3019, 0.0127, 0.00041)]},
        (0.5,): {"alpha": [(0.5065, 0.0071, 0.00008), (0.5027, 0.0053, 0.00006), (0.5007, 0.0042, 0.000062)]},
        (0.7,): {"alpha": [(0.7067, 0.0152, 0.00072), (0.7053, 0.0140, 0.00053), (0.7015, 0.0134, 0.00029)]},
        (0.9,): {"alpha": [(0.9096, 0.0086, 0.00026), (0.9056, 0.0078, 0.00021), (0.9042, 0.0080, 0.00012)]}}},
}

TING_TABLE_T = 1.0
FRACMOM_TABLE_T = 1000.0
FRACMOM_TABLE_P = 0.05
ING_EPS_TABLE_EPS = 0.5


def _cell_seed(seed: int, table: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, table, index]).generate_state(1, np.uint64)[0])


def table_configs(which: int, seed: int, t: float | None = None, replications: int = 100,
                  p: float = FRACMOM_TABLE_P, eps: float = ING_EPS_TABLE_EPS) -> list[McConfig]:
    """McConfigs for every (parameter point, N) cell of reference table ``which``."""
    if which not in REFERENCE_TABLES:
        raise DomainError(f"table must be one of {sorted(REFERENCE_TABLES)}")
    ref = REFERENCE_TABLES[which]
    configs = []
    index = 0
    for point in ref["cells"]:
        if ref["family"] == "ting":
            params = ModelParams.ting(*point)
            horizon, opts = (TING_TABLE_T if t is None else t), {}
        else:
            params = ModelParams(ref["family"], point[0], eps=eps if ref["family"] == "ing-eps" else None)
            horizon, opts = (FRACMOM_TABLE_T if t is None else t), {"p": p}
        for n in ref["sizes"]:
            configs.append(McConfig(params, horizon, n, replications, ref["estimator"],
                                    _cell_seed(seed, which, index), opts))
            index += 1
    return configs


def run_table(which: int, seed: int, workers: int = 1, **kw) -> list[McSummary]:
    """Re-run every cell of a reference table; failed cells are returned, not raised."""
    return [run_mc(c, workers=workers, strict=False) for c in table_configs(which, seed, **kw)]


def envelope_check(which: int, summaries: list[McSummary], width: float = 4.0) -> list[dict]:
    """Compare re-run means with the reference means, cell by cell.

    A cell passes when the re-run mean lies within ``width`` times the
    reference MAD of the reference mean and the cell did not fail.
    """
    ref = REFERENCE_TABLES[which]
    out = []
    for s in summaries:
        c = s.config
        p = c.params
        point = (p.alpha, p.theta) if ref["family"] == "ting" else (p.alpha,)
        j = ref["sizes"].index(c.sample_size)
        for name, cells in ref["cells"][point].items():
            ref_mean, ref_mad, ref_mse = cells[j]
            got = s.rows[name]["mean"]
            lo, hi = ref_mean - width * ref_mad, ref_mean + width * ref_mad
            out.append({
                "table": which, "point": point, "N": c.sample_size, "parameter": name,
                "reference_mean": ref_mean, "reference_mad": ref_mad, "reference_mse": ref_mse,
                "mean": got, "mad": s.rows[name]["mad"], "mse": s.rows[name]["mse"],
                "low": lo, "high": hi, "failed_replications": s.n_failed,
                "ok": (not s.failed) and lo <= got <= hi,
            })
    return out
