"""Non-parametric lifetime estimation under right censoring.

Implements the product-limit survival estimator, the cause-specific
cumulative incidence estimator for the execution/cancellation competing
risks, its variance, log-log confidence intervals, and the post-and-wait
variant that treats cancellation as censoring.

Curves are step functions.  Evaluation at a time ``t`` uses the events
strictly before ``t``, so ``curve.at(t_k)`` is the pre-jump value and
``curve.at(t_k + eps)`` the post-jump value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

CAUSE_CENSORED = 0
CAUSE_EXECUTION = 1
CAUSE_CANCELLATION = 2


class EmptyInput(ValueError):
    pass


class DegenerateRiskSet(ValueError):
    pass


@dataclass(slots=True)
class Observation:
    """One possibly-censored duration: ``cause`` 0 censored, 1 execution, 2 cancellation."""

    time: float
    cause: int
    weight: float = 1.0

    def __post_init__(self) -> None:
        if self.time <= 0:
            raise ValueError(f"duration must be positive, got {self.time}")
        if self.weight < 0 or not math.isfinite(self.weight):
            raise ValueError(f"weight must be finite and >= 0, got {self.weight}")


# ---------------------------------------------------------------------------
# Gaussian quantile (rational approximation, |relative error| < 1.2e-9)
# ---------------------------------------------------------------------------

_NQ_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
         1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_NQ_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
         6.680131188771972e01, -1.328068155288572e01)
_NQ_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
         -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_NQ_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
         3.754408661907416e00)


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0, 1), got {p}")
    a, b, c, d = _NQ_A, _NQ_B, _NQ_C, _NQ_D
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    if p > 1.0 - p_low:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    q = p - 0.5
    r = q * q
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / (
        ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0
    )


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------


@dataclass
class SurvivalCurve:
    """Product-limit curve with its risk-set bookkeeping.

    ``values[k]`` is the survival just after ``times[k]``; ties aggregate
    deaths and censorings at the same time, with censorings leaving the risk
    set after the deaths are counted.
    """

    times: np.ndarray
    values: np.ndarray  # post-jump survival
    at_risk: np.ndarray  # n_k, weighted
    deaths: np.ndarray  # d_k, weighted
    censored: np.ndarray  # c_k, weighted

    def at(self, t: float | np.ndarray) -> float | np.ndarray:
        """Survival at ``t`` using events strictly before ``t``."""
        idx = np.searchsorted(self.times, np.asarray(t), side="left")
        padded = np.concatenate(([1.0], self.values))
        out = padded[idx]
        return float(out) if np.isscalar(t) or np.asarray(t).ndim == 0 else out


@dataclass
class CIFCurve:
    """Aalen-Johansen cumulative incidence for the two competing causes."""

    times: np.ndarray
    cif: dict[int, np.ndarray]  # cause -> post-jump incidence
    survival: np.ndarray  # all-cause post-jump survival
    at_risk: np.ndarray
    deaths: dict[int, np.ndarray]  # cause -> d_k^i
    censored: np.ndarray
    variance: dict[int, np.ndarray] = field(default_factory=dict)
    skipped_terms: int = 0  # risk sets of size <= 1 dropped from the variance

    def incidence_at(self, cause: int, t: float | np.ndarray) -> float | np.ndarray:
        idx = np.searchsorted(self.times, np.asarray(t), side="left")
        padded = np.concatenate(([0.0], self.cif[cause]))
        out = padded[idx]
        return float(out) if np.isscalar(t) or np.asarray(t).ndim == 0 else out

    def survival_at(self, t: float | np.ndarray) -> float | np.ndarray:
        idx = np.searchsorted(self.times, np.asarray(t), side="left")
        padded = np.concatenate(([1.0], self.survival))
        out = padded[idx]
        return float(out) if np.isscalar(t) or np.asarray(t).ndim == 0 else out

    def variance_at(self, cause: int, t: float) -> float:
        if cause not in self.variance:
            self.variance[cause] = gray_variance(self, cause)
        idx = np.searchsorted(self.times, t, side="left")
        padded = np.concatenate(([0.0], self.variance[cause]))
        return float(padded[idx])

    def confidence_interval(self, cause: int, t: float, alpha: float = 0.05) -> tuple[float, float]:
        f = self.incidence_at(cause, t)
        return log_log_ci(f, self.variance_at(cause, t), alpha)


def _tabulate(obs: Sequence[Observation]):
    """Aggregate observations into per-unique-time weighted counts."""
    if not obs:
        raise EmptyInput("no observations")
    active = [o for o in obs if o.weight > 0]
    if not active:
        raise EmptyInput("all observations have zero weight")
    times = np.array([o.time for o in active])
    causes = np.array([o.cause for o in active])
    weights = np.array([o.weight for o in active])
    order = np.argsort(times, kind="stable")
    times, causes, weights = times[order], causes[order], weights[order]
    uniq, inverse = np.unique(times, return_inverse=True)
    k = len(uniq)
    w1 = np.bincount(inverse, weights=weights * (causes == CAUSE_EXECUTION), minlength=k)
    w2 = np.bincount(inverse, weights=weights * (causes == CAUSE_CANCELLATION), minlength=k)
    wc = np.bincount(inverse, weights=weights * (causes == CAUSE_CENSORED), minlength=k)
    total = w1 + w2 + wc
    # n_k = weight still at risk just before each unique time
    n = np.concatenate(([weights.sum()], weights.sum() - np.cumsum(total)[:-1]))
    return uniq, n, w1, w2, wc


def kaplan_meier(
    obs: Sequence[Observation],
    death_causes: tuple[int, ...] = (CAUSE_EXECUTION, CAUSE_CANCELLATION),
    tie_first_causes: tuple[int, ...] = (),
) -> SurvivalCurve:
    """Product-limit estimator; causes outside ``death_causes`` censor.

    ``tie_first_causes`` name events that, at a shared timestamp, leave the
    risk set before this curve's deaths are counted.  The main lifetime
    curves never need it (their deaths go first); the censoring-survival
    curve does, because executions at the same instant precede the
    cancellations it treats as deaths.
    """
    uniq, n, w1, w2, wc = _tabulate(obs)
    counts = {CAUSE_EXECUTION: w1, CAUSE_CANCELLATION: w2, CAUSE_CENSORED: wc}
    d = np.zeros_like(n)
    first = np.zeros_like(n)
    c = np.zeros_like(n)
    for cause, w in counts.items():
        if cause in death_causes:
            d = d + w
        else:
            c = c + w
            if cause in tie_first_causes:
                first = first + w
    denom = n - first
    with np.errstate(invalid="ignore"):
        factors = np.where(denom > 0, 1.0 - d / np.where(denom > 0, denom, 1.0), 1.0)
    values = np.cumprod(factors)
    return SurvivalCurve(uniq, values, n, d, c)


def aalen_johansen(obs: Sequence[Observation]) -> CIFCurve:
    """Cause-specific cumulative incidence built on the all-cause curve."""
    uniq, n, w1, w2, wc = _tabulate(obs)
    d = w1 + w2
    with np.errstate(invalid="ignore"):
        factors = np.where(n > 0, 1.0 - d / np.where(n > 0, n, 1.0), 1.0)
    survival = np.cumprod(factors)
    s_prev = np.concatenate(([1.0], survival[:-1]))
    safe_n = np.where(n > 0, n, 1.0)
    cif1 = np.cumsum(s_prev * w1 / safe_n)
    cif2 = np.cumsum(s_prev * w2 / safe_n)
    return CIFCurve(
        times=uniq,
        cif={CAUSE_EXECUTION: cif1, CAUSE_CANCELLATION: cif2},
        survival=survival,
        at_risk=n,
        deaths={CAUSE_EXECUTION: w1, CAUSE_CANCELLATION: w2},
        censored=wc,
    )


def gray_variance(curve: CIFCurve, cause: int) -> np.ndarray:
    """Variance of the cumulative incidence, returned at each event time.

    ``out[j]`` estimates the variance of the incidence for horizons in
    ``(times[j], times[j+1]]``.  Terms whose risk set is <= 1 are skipped
    (the formula divides by ``n_k - 1``) and counted in
    ``curve.skipped_terms``; negative rounding residue clamps to zero.
    """
    n = curve.at_risk
    d = curve.deaths[CAUSE_EXECUTION] + curve.deaths[CAUSE_CANCELLATION]
    di = curve.deaths[cause]
    fi = curve.cif[cause]  # post-jump incidence at each event time
    s_prev = np.concatenate(([1.0], curve.survival[:-1]))
    usable = n > 1
    curve.skipped_terms += int(np.sum(~usable & (d > 0)))
    m = np.where(n > 0, (n - di) / np.where(n > 0, n, 1.0), 0.0)

    # expanding (F(t) - F(t_k))^2 and the cross term turns the three sums
    # into prefix sums; a risk set fully wiped at t_k (n_k = d_k) can only be
    # the final event, where F(t) - F(t_k) = 0, so zeroing its coefficient
    # reproduces the direct summation exactly
    survivors = n - d
    safe_surv = np.where(survivors > 0, survivors, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(usable & (survivors > 0), d / ((n - 1.0) * safe_surv), 0.0)
        b = np.where(usable, s_prev**2 * di * m / ((n - 1.0) * np.where(n > 0, n, 1.0)), 0.0)
        c = np.where(usable & (survivors > 0), s_prev * di * m / (safe_surv * (n - 1.0)), 0.0)
    cum_a = np.cumsum(a)
    cum_fa = np.cumsum(fi * a)
    cum_f2a = np.cumsum(fi**2 * a)
    cum_b = np.cumsum(b)
    cum_c = np.cumsum(c)
    cum_fc = np.cumsum(fi * c)
    out = (
        fi**2 * cum_a - 2.0 * fi * cum_fa + cum_f2a
        + cum_b
        - 2.0 * (fi * cum_c - cum_fc)
    )
    return np.maximum(out, 0.0)


def log_log_ci(fhat: float, var: float, alpha: float = 0.05) -> tuple[float, float]:
    """Log-log confidence interval around a cumulative incidence value.

    Degenerate values (0, 1, or zero variance) return a point interval.
    """
    if var < 0:
        raise ValueError(f"variance must be >= 0, got {var}")
    if fhat <= 0.0 or fhat >= 1.0 or var == 0.0:
        return (fhat, fhat)
    log_f = math.log(fhat)
    q = normal_quantile(1.0 - alpha / 2.0)
    c = q * math.sqrt(var) / (fhat * log_f)

    def power(exponent_arg: float) -> float:
        # fhat ** exp(exponent_arg), evaluated in log space to dodge overflow
        scaled = log_f * math.exp(exponent_arg) if exponent_arg < 709.0 else -math.inf
        return math.exp(scaled) if scaled > -745.0 else 0.0

    lo, hi = power(-c), power(c)
    lo, hi = min(lo, hi), max(lo, hi)
    return (max(lo, 0.0), min(hi, 1.0))


def post_and_wait_fill(obs: Sequence[Observation]) -> SurvivalCurve:
    """Execution-only product-limit curve: cancellation counts as censoring.

    Query the fill probability at a horizon with :func:`fill_probability_at`.
    """
    return kaplan_meier(obs, death_causes=(CAUSE_EXECUTION,))


def fill_probability_at(curve: SurvivalCurve, horizon: float) -> float:
    """Fill probability within the horizon, ``1 - S(T)``."""
    return 1.0 - float(curve.at(horizon))


# ---------------------------------------------------------------------------
# Conditional (bucketed) estimation
# ---------------------------------------------------------------------------


@dataclass
class BucketReport:
    kept: dict[tuple, int]
    omitted: dict[tuple, int]


def observations_from_records(records: Iterable) -> list[Observation]:
    """Lifecycle records -> observations; outcome enum values match causes."""
    return [Observation(time=r.outcome_time, cause=int(r.outcome)) for r in records]


def conditional_curves(
    records: Sequence,
    by: Sequence[tuple[str, Sequence[float]]],
    min_count: int = 200,
) -> tuple[dict[tuple, CIFCurve], BucketReport]:
    """Independent incidence estimation on a 1-D or 2-D feature grid.

    ``by`` gives (feature name, bucket edges) pairs; a record lands in bucket
    ``i`` of a feature when ``edges[i] <= value < edges[i+1]``.  Buckets with
    fewer than ``min_count`` records are omitted and reported.
    """
    if not 1 <= len(by) <= 2:
        raise ValueError("bucketing must use one or two features")
    groups: dict[tuple, list] = {}
    for rec in records:
        key = []
        for name, edges in by:
            value = getattr(rec.features, name)
            idx = int(np.searchsorted(edges, value, side="right")) - 1
            if idx < 0 or idx >= len(edges) - 1:
                break
            key.append(idx)
        else:
            groups.setdefault(tuple(key), []).append(rec)
    curves: dict[tuple, CIFCurve] = {}
    kept: dict[tuple, int] = {}
    omitted: dict[tuple, int] = {}
    for key in sorted(groups):
        recs = groups[key]
        if len(recs) < min_count:
            omitted[key] = len(recs)
            continue
        curves[key] = aalen_johansen(observations_from_records(recs))
        kept[key] = len(recs)
    return curves, BucketReport(kept=kept, omitted=omitted)
