"""Decision-labeling backtest of the placement router.

Real (or synthetic) limit orders are relabeled by their realized outcome:
executed within the horizon, or saved by a falling ask, means posting was
right; a rising ask after a non-execution means crossing immediately was
right.  Each candidate model's sign-of-saved-cost decision is then scored as
a binary classifier per action.  Only the limit-versus-market call is
testable this way, not the optimal distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cleanup import CleanupModel
from .fill_model import FillModel
from .placement import FeePolicy, MarketSnapshot, ToyModel, saved_cost
from .replay import OrderLifecycle, Outcome


class MissingPriceMove(ValueError):
    pass


class PeriodOverlap(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    """Router variant: how fill probability and clean-up cost are supplied."""

    id: str  # "I", "II", "III"
    fill: str  # "exponential" | "mlp"
    cleanup: str  # "constant" | "mlp"


MODEL_I = ModelSpec("I", "exponential", "constant")
MODEL_II = ModelSpec("II", "mlp", "constant")
MODEL_III = ModelSpec("III", "mlp", "mlp")


@dataclass
class RouterModels:
    """Trained components shared by the three specs."""

    toy: ToyModel | None = None
    fill: FillModel | None = None
    cleanup: CleanupModel | None = None
    constant_cleanup: float = 0.0  # ticks
    trained_span: tuple[int, int] | None = None

    def fill_probability(self, spec: ModelSpec, record: OrderLifecycle) -> float:
        if spec.fill == "exponential":
            if self.toy is None:
                raise ValueError("exponential fill component not fitted")
            ask_distance = record.features.spread + record.features.delta
            return min(1.0, self.toy.fill_probability(ask_distance))
        if self.fill is None:
            raise ValueError("fill model not trained")
        return float(self.fill.predict(record.features))

    def cleanup_ticks(self, spec: ModelSpec, record: OrderLifecycle) -> float:
        if spec.cleanup == "constant":
            return self.constant_cleanup
        if self.cleanup is None:
            raise ValueError("clean-up model not trained")
        return float(self.cleanup.predict(record.features))


@dataclass
class EligibilityConfig:
    min_size: float = 0.0
    max_size_ats_multiple: float = 5.0
    max_distance: float = math.inf  # ticks


def select_eligible(
    records: Sequence[OrderLifecycle],
    horizon: float,
    average_trade_size: float,
    config: EligibilityConfig | None = None,
) -> list[OrderLifecycle]:
    """Orders filled within the horizon or observed alive through it, inside
    the size and distance bounds."""
    cfg = config or EligibilityConfig()
    max_size = cfg.max_size_ats_multiple * average_trade_size
    out = []
    for rec in records:
        filled_in_time = rec.outcome is Outcome.FILLED and rec.outcome_time <= horizon
        survived = rec.outcome_time > horizon
        if not (filled_in_time or survived):
            continue
        if not (cfg.min_size <= rec.size <= max_size):
            continue
        if rec.features.delta > cfg.max_distance:
            continue
        out.append(rec)
    return out


def label_outcome(record: OrderLifecycle, horizon: float) -> int | None:
    """1 when posting was right in hindsight, 0 when crossing was, None for ties."""
    if record.outcome is Outcome.FILLED and record.outcome_time <= horizon:
        return 1
    if record.dp_ask_horizon is None:
        raise MissingPriceMove(f"order {record.order_id} lacks an ask move at the horizon")
    if record.dp_ask_horizon < 0:
        return 1
    if record.dp_ask_horizon > 0:
        return 0
    return None


@dataclass
class ActionMetrics:
    precision: float
    recall: float
    f_score: float
    true_positive: int
    false_positive: int
    false_negative: int


@dataclass
class BacktestReport:
    per_model: dict[str, dict[str, ActionMetrics]]
    decisions: dict[str, list[int]]
    labels: list[int]
    excluded_ties: int
    evaluated: int


def _metrics(pred: np.ndarray, truth: np.ndarray, positive: int) -> ActionMetrics:
    tp = int(np.sum((pred == positive) & (truth == positive)))
    fp = int(np.sum((pred == positive) & (truth != positive)))
    fn = int(np.sum((pred != positive) & (truth == positive)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ActionMetrics(precision, recall, f, tp, fp, fn)


def run_backtest(
    records: Sequence[OrderLifecycle],
    specs: Sequence[ModelSpec],
    models: RouterModels,
    fees: FeePolicy,
    horizon: float,
    tick_size: float,
) -> BacktestReport:
    """Score each spec's limit/market call against the realized labels.

    The snapshot behind each decision is rebuilt from the record's own
    insertion state; a training span overlapping the scored records raises.
    """
    if models.trained_span is not None and records:
        t_lo = min(r.insert_ts for r in records)
        t_hi = max(r.insert_ts for r in records)
        lo, hi = models.trained_span
        if t_lo <= hi and lo <= t_hi:
            raise PeriodOverlap(
                f"training span [{lo}, {hi}] intersects scored records [{t_lo}, {t_hi}]"
            )
    labels: list[int] = []
    used: list[OrderLifecycle] = []
    ties = 0
    for rec in records:
        label = label_outcome(rec, horizon)
        if label is None:
            ties += 1
            continue
        labels.append(label)
        used.append(rec)

    decisions: dict[str, list[int]] = {spec.id: [] for spec in specs}
    for rec in used:
        best_bid_ticks = rec.price + int(rec.features.delta) if rec.side.value == "bid" else None
        if best_bid_ticks is None:
            best_bid_ticks = int(rec.price - rec.features.delta - rec.features.spread)
        best_ask_ticks = best_bid_ticks + int(rec.features.spread)
        snapshot = MarketSnapshot(
            best_bid=best_bid_ticks * tick_size,
            best_ask=best_ask_ticks * tick_size,
            tick_size=tick_size,
            features=rec.features,
        )
        for spec in specs:
            f = models.fill_probability(spec, rec)
            v = models.cleanup_ticks(spec, rec)
            s = saved_cost(snapshot, int(rec.features.delta), fees, f, v)
            decisions[spec.id].append(1 if s > 0 else 0)

    truth = np.asarray(labels)
    per_model: dict[str, dict[str, ActionMetrics]] = {}
    for spec in specs:
        pred = np.asarray(decisions[spec.id])
        per_model[spec.id] = {
            "limit": _metrics(pred, truth, positive=1),
            "market": _metrics(pred, truth, positive=0),
        }
    return BacktestReport(
        per_model=per_model,
        decisions=decisions,
        labels=labels,
        excluded_ties=ties,
        evaluated=len(used),
    )
