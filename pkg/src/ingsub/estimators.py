"""Estimators for the InG, InG-eps and TInG subordinators.

* closed-form maximum likelihood for alpha from jump samples, with
  asymptotic normal confidence intervals;
* method of moments for (alpha, theta) of TInG from path values;
* fractional-moment estimation of alpha from InG / InG-eps path values.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np
from scipy import optimize
from scipy.stats import norm

from .errors import (
    BracketError,
    ConvergenceError,
    DegenerateInputError,
    DomainError,
    InfeasibleMomentsError,
)
from .sim import Family, ModelParams, poisson_rate
from .specfun import log_gamma

__all__ = [
    "Estimator",
    "VarianceModel",
    "EstimateReport",
    "MomentEquations",
    "mle_alpha_from_log_sum",
    "mle_alpha_from_excess",
    "mle_alpha_ing",
    "mle_alpha_ing_eps",
    "mle_asymptotic_ci",
    "asymptotic_variance",
    "ting_moments",
    "mom_ting",
    "fractional_moment",
    "fracmom_alpha",
    "score_ing",
    "score_ing_eps",
    "log_density_derivatives_ing",
]


class Estimator(str, Enum):
    MLE_ING = "mle-ing"
    MLE_ING_EPS = "mle-ing-eps"
    MOM_TING = "mom-ting"
    FRACMOM_ING = "fracmom-ing"
    FRACMOM_ING_EPS = "fracmom-ing-eps"


class VarianceModel(str, Enum):
    """Asymptotic variance sigma^2 of the alpha MLE.

    FISHER   sin^2(pi a) / pi^2, the inverse Fisher information; it applies to
             both InG and InG-eps (same score variance).
    COS2     2 sin(pi a) / (pi^2 (3 + cos(2 pi a))).
    COT_LOG  1 / (pi^2 + 2 pi^2 cot^2(pi a) + 2 pi cot(pi a) ln eps + ln^2 eps).

    COS2 and COT_LOG are the alternative closed forms in circulation; they
    agree with FISHER only at special points (COS2 at a = 1/2).
    """

    FISHER = "fisher"
    COS2 = "cos2"
    COT_LOG = "cot-log"


@dataclass
class EstimateReport:
    """Point estimate with optional standard errors and confidence intervals."""

    estimator: Estimator
    point: dict[str, float]
    n: int
    stderr: dict[str, float] | None = None
    ci: dict[str, tuple[float, float]] | None = None
    level: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["estimator"] = self.estimator.value
        if self.ci is not None:
            d["ci"] = {k: list(v) for k, v in self.ci.items()}
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), default=_json_default, **kw)


def _json_default(o):
    if isinstance(o, Enum):
        return o.value
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# ---------------------------------------------------------------- MLE


def mle_alpha_from_log_sum(log_sum: float, n: int) -> tuple[float, str]:
    """Solve ``tan(pi a) = n pi / S`` for the unique root a in (0, 1).

    ``S`` is the sum of log excesses. ``arctan(n pi / S)`` is mapped to
    ``(0, 1/2)`` when positive and shifted by pi into ``(1/2, 1)`` when
    negative; ``atan2`` performs that branch selection in one step and covers
    ``S = 0`` (a = 1/2, the tan = inf limit).

    Returns
    -------
    alpha, branch
    """
    if n < 1:
        raise DomainError("need at least one observation")
    if not math.isfinite(log_sum):
        raise DomainError(f"log excess sum must be finite, got {log_sum}")
    alpha = math.atan2(n * math.pi, log_sum) / math.pi
    if log_sum > 0:
        branch = "arctan>0"
    elif log_sum < 0:
        branch = "arctan<0"
    else:
        branch = "S=0"
    return alpha, branch


def _mle_report(log_excess: np.ndarray, estimator: Estimator, extra: dict) -> EstimateReport:
    n = log_excess.size
    s = math.fsum(log_excess)
    alpha, branch = mle_alpha_from_log_sum(s, n)
    d2 = -n * (math.pi / math.sin(math.pi * alpha)) ** 2
    assert d2 < 0, "log-likelihood must be concave at the critical point"
    diag = {"log_excess_sum": s, "branch": branch, "second_derivative": d2, **extra}
    return EstimateReport(estimator=estimator, point={"alpha": alpha}, n=n, diagnostics=diag)


def mle_alpha_from_excess(excess, eps: float | None = None) -> EstimateReport:
    """MLE of alpha from jump excesses ``z - lower_bound``.

    Use this when jumps near the support bound were stored as excesses; the
    result is identical to :func:`mle_alpha_ing` / :func:`mle_alpha_ing_eps`
    on ``lower_bound + excess`` but immune to rounding of ``z`` onto the bound.
    """
    x = np.asarray(excess, dtype=float).ravel()
    if x.size == 0:
        raise DomainError("need at least one observation")
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise DomainError("jump excesses must be finite and >= 0")
    if np.any(x == 0):
        raise DegenerateInputError("a jump lies exactly on the support bound (log-likelihood is -inf)")
    if eps is None:
        return _mle_report(np.log(x), Estimator.MLE_ING, {})
    if not (eps > 0):
        raise DomainError(f"eps must be > 0, got {eps}")
    return _mle_report(np.log(x / eps), Estimator.MLE_ING_EPS, {"eps": eps, "scale_free": True})


def mle_alpha_ing(jumps) -> EstimateReport:
    """Closed-form MLE of alpha from i.i.d. InG jumps (all > 1).

    Raises
    ------
    DomainError
        If a jump is below 1 or not finite.
    DegenerateInputError
        If a jump equals 1 exactly.
    """
    z = np.asarray(jumps, dtype=float).ravel()
    if z.size == 0:
        raise DomainError("need at least one observation")
    if not np.all(np.isfinite(z)) or np.any(z < 1.0):
        raise DomainError("InG jumps must be finite and >= 1")
    return mle_alpha_from_excess(z - 1.0)


def mle_alpha_ing_eps(jumps, eps: float, scale_free: bool = True) -> EstimateReport:
    """Closed-form MLE of alpha from i.i.d. InG-eps jumps (all > eps).

    The InG-eps density carries a factor ``eps^alpha``, so the likelihood
    equation reads ``n pi cot(pi a) = sum ln((z_i - eps) / eps)``. With
    ``scale_free=False`` the ``ln eps`` term is dropped, i.e. the InG formula
    is applied to ``z_i - eps`` directly; that variant maximizes the
    likelihood only when ``eps == 1`` and is kept for comparison.
    """
    if not (eps > 0) or not math.isfinite(eps):
        raise DomainError(f"eps must be finite and > 0, got {eps}")
    z = np.asarray(jumps, dtype=float).ravel()
    if z.size == 0:
        raise DomainError("need at least one observation")
    if not np.all(np.isfinite(z)) or np.any(z < eps):
        raise DomainError("InG-eps jumps must be finite and >= eps")
    if scale_free:
        return mle_alpha_from_excess(z - eps, eps=eps)
    if np.any(z == eps):
        raise DegenerateInputError("a jump lies exactly on the support bound (log-likelihood is -inf)")
    return _mle_report(np.log(z - eps), Estimator.MLE_ING_EPS, {"eps": eps, "scale_free": False})


def asymptotic_variance(alpha: float, model: VarianceModel | str, eps: float | None = None) -> float:
    """sigma^2 such that sqrt(n) (alpha_hat - alpha) -> N(0, sigma^2)."""
    model = VarianceModel(model)
    s = math.sin(math.pi * alpha)
    if model is VarianceModel.FISHER:
        return (s / math.pi) ** 2
    if model is VarianceModel.COS2:
        return 2.0 * s / (math.pi**2 * (3.0 + math.cos(2.0 * math.pi * alpha)))
    if eps is None:
        raise DomainError("the cot-log variance model needs eps")
    cot = math.cos(math.pi * alpha) / s
    le = math.log(eps)
    return 1.0 / (math.pi**2 + 2 * math.pi**2 * cot**2 + 2 * math.pi * cot * le + le**2)


def mle_asymptotic_ci(report: EstimateReport, level: float = 0.95,
                      variance_model: VarianceModel | str = VarianceModel.FISHER) -> EstimateReport:
    """Attach the normal-approximation standard error and interval to an MLE report.

    The interval is ``a_hat -/+ q sigma / sqrt(n)`` clipped to [0, 1], with
    sigma^2 from ``variance_model`` evaluated at the estimate. All available
    sigma^2 values are recorded in the diagnostics so that disagreement
    between the models is visible.
    """
    if not (0.0 < level < 1.0):
        raise DomainError(f"level must lie in (0, 1), got {level}")
    if report.estimator not in (Estimator.MLE_ING, Estimator.MLE_ING_EPS):
        raise DomainError("confidence intervals are only defined for the MLE reports")
    model = VarianceModel(variance_model)
    if report.n < 30:
        warnings.warn(f"n = {report.n} is small for the normal approximation", stacklevel=2)
    a = report.point["alpha"]
    eps = report.diagnostics.get("eps")
    sig2 = {VarianceModel.FISHER.value: asymptotic_variance(a, VarianceModel.FISHER),
            VarianceModel.COS2.value: asymptotic_variance(a, VarianceModel.COS2)}
    if eps is not None:
        sig2[VarianceModel.COT_LOG.value] = asymptotic_variance(a, VarianceModel.COT_LOG, eps)
    if model.value not in sig2:
        raise DomainError(f"variance model {model.value} requires eps (InG-eps report)")
    se = math.sqrt(sig2[model.value] / report.n)
    q = float(norm.ppf(0.5 + level / 2.0))
    lo, hi = max(0.0, a - q * se), min(1.0, a + q * se)
    vals = list(sig2.values())
    diag = dict(report.diagnostics)
    diag.update(
        variance_model=model.value,
        sigma2=sig2,
        variance_models_agree=bool(np.allclose(vals, vals[0], rtol=1e-9, atol=0.0)),
        normal_quantile=q,
    )
    return EstimateReport(report.estimator, dict(report.point), report.n,
                          stderr={"alpha": se}, ci={"alpha": (lo, hi)}, level=level, diagnostics=diag)


def score_ing(alpha: float, z):
    """d/d alpha of the InG log-density: ``pi cot(pi alpha) - ln(z - 1)``."""
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 1.0)):
        raise DomainError("score_ing needs z > 1")
    out = math.pi / math.tan(math.pi * alpha) - np.log(z - 1.0)
    return out if out.ndim else float(out)


def score_ing_eps(alpha: float, eps: float, z):
    """d/d alpha of the InG-eps log-density: ``pi cot(pi alpha) + ln eps - ln(z - eps)``."""
    if not (eps > 0):
        raise DomainError(f"eps must be > 0, got {eps}")
    z = np.asarray(z, dtype=float)
    if np.any(~(z > eps)):
        raise DomainError("score_ing_eps needs z > eps")
    return score_ing(alpha, 1.0 + (z - eps) / eps)


def log_density_derivatives_ing(alpha: float) -> tuple[float, float]:
    """Second and third alpha-derivatives of the InG log-density (z-free).

    ``-pi^2 csc^2(pi a)`` and ``2 pi^3 cot(pi a) csc^2(pi a)``.
    """
    csc2 = 1.0 / math.sin(math.pi * alpha) ** 2
    cot = 1.0 / math.tan(math.pi * alpha)
    return -math.pi**2 * csc2, 2.0 * math.pi**3 * cot * csc2


# ---------------------------------------------------------------- TInG moments

_VARIANCE_FORMULAS = ("density", "alpha-minus-one")


@dataclass(frozen=True)
class MomentEquations:
    """Sample moments of TInG path values observed at horizon t."""

    t: float
    m1: float
    m2: float

    def __post_init__(self):
        if not (self.t > 0):
            raise DomainError(f"t must be > 0, got {self.t}")
        if not (self.m1 > 0):
            raise DomainError("sample mean must be > 0")
        if self.m2 < self.m1**2:
            raise DomainError("m2 < m1^2: negative sample variance")

    @classmethod
    def from_data(cls, data, t: float) -> MomentEquations:
        x = np.asarray(data, dtype=float).ravel()
        if x.size < 2:
            raise DomainError("need at least two path values")
        if not np.all(np.isfinite(x)) or np.any(x < 0):
            raise DomainError("path values must be finite and >= 0")
        return cls(float(t), float(np.mean(x)), float(np.mean(x * x)))


def ting_moments(alpha, theta, t: float, variance_formula: str = "density"):
    """Mean and raw second moment of S(t) for TInG.

    mean = t a theta^(a-1) e^-theta. The variance is
    ``t a e^-theta (theta^(a-1) + (1-a) theta^(a-2))`` from integrating the
    jump density (``variance_formula="density"``). The form with ``(a-1)`` in
    place of ``(1-a)`` is available as ``"alpha-minus-one"``; it can be
    negative (e.g. whenever theta < 1 - a) and is not consistent with the
    jump law.
    """
    if variance_formula not in _VARIANCE_FORMULAS:
        raise DomainError(f"variance_formula must be one of {_VARIANCE_FORMULAS}")
    base = t * alpha * np.exp(-theta)
    mean = base * theta ** (alpha - 1.0)
    sign = 1.0 if variance_formula == "density" else -1.0
    var = mean + sign * (1.0 - alpha) * base * theta ** (alpha - 2.0)
    return mean, var + mean * mean


_MOM_STARTS = [(0.2, 0.3), (0.2, 0.7), (0.5, 0.3), (0.5, 0.7), (0.8, 0.3)]
_MOM_RESID_TOL = 1e-10
_MOM_STEP_TOL = 1e-12
_MOM_MAX_ITER = 10_000
_MOM_INFEASIBLE = 1e-3


def _to_unconstrained(alpha, theta):
    return np.array([math.log(alpha / (1.0 - alpha)), math.log(theta)])


def _from_unconstrained(u):
    alpha = 1.0 / (1.0 + math.exp(-u[0])) if u[0] > -700 else 0.0
    return alpha, math.exp(min(u[1], 700.0))


def mom_ting(data=None, t: float = 1.0, init: tuple[float, float] | None = None, *,
             moments: MomentEquations | None = None,
             variance_formula: str = "density") -> EstimateReport:
    """Method-of-moments estimate of (alpha, theta) for TInG.

    Matches the first two raw moments of S(t) by minimizing the sum of
    squared relative residuals in (logit alpha, log theta) with Nelder-Mead
    from a fixed set of starts; the lowest residual wins (ties to the first
    start).

    Parameters
    ----------
    data : array_like, optional
        Observed path values S(t). Ignored if ``moments`` is given.
    t : float
        Observation horizon.
    init : (alpha, theta), optional
        Extra start tried before the default grid.
    moments : MomentEquations, optional
        Sample moments supplied directly.
    variance_formula : {"density", "alpha-minus-one"}
        See :func:`ting_moments`.

    Raises
    ------
    ConvergenceError
        If no start converges within the iteration cap.
    InfeasibleMomentsError
        If the best residual norm stays above 1e-3.
    """
    eq = moments if moments is not None else MomentEquations.from_data(data, t)
    n = -1 if moments is not None else int(np.asarray(data).size)
    target = np.array([eq.m1, eq.m2])

    def residuals(u):
        a, th = _from_unconstrained(u)
        if not (0.0 < a < 1.0) or not (th > 0.0):
            return np.array([np.inf, np.inf])
        return np.asarray(ting_moments(a, th, eq.t, variance_formula)) / target - 1.0

    def objective(u):
        r = residuals(u)
        v = float(r @ r)
        return v if math.isfinite(v) else 1e300

    starts = ([tuple(init)] if init is not None else []) + _MOM_STARTS
    runs = []
    for k, (a0, th0) in enumerate(starts):
        if not (0.0 < a0 < 1.0 and th0 > 0.0):
            raise DomainError(f"invalid start ({a0}, {th0})")
        res = optimize.minimize(
            objective, _to_unconstrained(a0, th0), method="Nelder-Mead",
            options={"xatol": _MOM_STEP_TOL, "fatol": _MOM_RESID_TOL**2,
                     "maxiter": _MOM_MAX_ITER, "maxfev": 2 * _MOM_MAX_ITER},
        )
        norm_r = float(np.linalg.norm(residuals(res.x)))
        converged = bool(res.success) or norm_r < _MOM_RESID_TOL
        runs.append((norm_r, k, res, converged))
    ok = [r for r in runs if r[3]]
    if not ok:
        raise ConvergenceError("method of moments: no start converged within the iteration cap")
    norm_r, k, res, _ = min(ok, key=lambda r: (r[0], r[1]))
    if norm_r > _MOM_INFEASIBLE:
        raise InfeasibleMomentsError(
            f"no (alpha, theta) reproduces m1={eq.m1:.6g}, m2={eq.m2:.6g} at t={eq.t} "
            f"(best relative residual {norm_r:.3g})"
        )
    alpha, theta = _from_unconstrained(res.x)
    diag = {
        "t": eq.t, "m1": eq.m1, "m2": eq.m2,
        "residual_norm": norm_r, "start_index": k, "iterations": int(res.nit),
        "variance_formula": variance_formula,
        "start_residuals": [r[0] for r in runs],
    }
    return EstimateReport(Estimator.MOM_TING, {"alpha": alpha, "theta": theta}, n, diagnostics=diag)


# ---------------------------------------------------------------- fractional moments

_FRACMOM_LO_PAD = 1e-6
_FRACMOM_HI = 1.0 - 1e-9
_FRACMOM_RETRIES = 4


def fractional_moment(alpha: float, p: float, t: float) -> float:
    """Large-t approximation ``Gamma(1 - p/a) / Gamma(1 - p) t^(p/a)`` to E[S(t)^p]."""
    return math.exp(log_gamma(1.0 - p / alpha) - log_gamma(1.0 - p) + (p / alpha) * math.log(t))


def _solve_fracmom(log_m: float, p: float, t: float):
    def h(a):
        return log_gamma(1.0 - p / a) - log_gamma(1.0 - p) + (p / a) * math.log(t) - log_m

    lo, hi = p + _FRACMOM_LO_PAD, _FRACMOM_HI
    h_lo, h_hi = h(lo), h(hi)
    if not (h_lo > 0.0 > h_hi):
        return None, (lo, hi, h_lo, h_hi)
    root, info = optimize.bisect(h, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps,
                                 maxiter=200, full_output=True)
    return root, info


def fracmom_alpha(data, t: float, p: float = 0.05, family: Family | str = Family.ING,
                  eps: float | None = None) -> EstimateReport:
    """Estimate alpha from the sample p-th moment of S(t) values.

    Solves ``mean(x^p) = Gamma(1 - p/a) / Gamma(1 - p) t^(p/a)`` for a in
    ``(p, 1)`` by bisection; the map is strictly decreasing there for t > 1.
    The same large-t law holds for InG and InG-eps (both have the stable
    tail ``~ z^(-1-a)`` in their Levy measure). If no root is bracketed,
    ``p`` is halved up to four times.

    Raises
    ------
    BracketError
        If no bracket is found after the retries.
    """
    family = Family(family)
    if family is Family.TING:
        raise DomainError("the fractional-moment estimator applies to ing and ing-eps only")
    if family is Family.ING_EPS and (eps is None or not eps > 0):
        raise DomainError("ing-eps needs eps > 0")
    if not (0.0 < p < 1.0):
        raise DomainError(f"p must lie in (0, 1), got {p}")
    if not (t > 1.0) or not math.isfinite(t):
        raise DomainError(f"t must be finite and > 1, got {t}")
    x = np.asarray(data, dtype=float).ravel()
    if x.size == 0:
        raise DomainError("need at least one path value")
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise DomainError("path values must be finite and >= 0")

    p_try = p
    attempts = []
    for _ in range(_FRACMOM_RETRIES + 1):
        m = float(np.mean(x**p_try))
        if m > 0:
            root, info = _solve_fracmom(math.log(m), p_try, t)
            if root is not None:
                break
            attempts.append({"p": p_try, "bracket": info[:2], "h": info[2:]})
        else:
            attempts.append({"p": p_try, "bracket": None, "h": None})
        p_try /= 2.0
    else:
        raise BracketError(f"fractional-moment equation has no root on (p, 1); attempts: {attempts}")

    est = Estimator.FRACMOM_ING if family is Family.ING else Estimator.FRACMOM_ING_EPS
    params = ModelParams(family, root, eps=eps if family is Family.ING_EPS else None)
    lam_t = poisson_rate(params) * t
    if lam_t < 10:
        warnings.warn(f"expected jump count {lam_t:.3g} is small for the large-t law", stacklevel=2)
    diag = {"p": p_try, "p_requested": p, "t": t, "sample_moment": m, "bisect_iterations": info.iterations,
            "retries": len(attempts), "expected_jumps": lam_t}
    if eps is not None:
        diag["eps"] = eps
    return EstimateReport(est, {"alpha": root}, int(x.size), diagnostics=diag)
