"""Limit-versus-market routing on expected saved cost.

The immediate tactic pays the fee-adjusted half spread; posting at distance
``delta`` saves the crossed spread when filled but risks the clean-up cost
of a marketable order at the horizon when not.  All distances are integer
ticks; the clean-up cost is carried in ticks and converted through the tick
size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .features import FeatureVector


class InadmissibleDistance(ValueError):
    pass


class NonpositiveDenominator(ValueError):
    pass


class ConditionViolated(ValueError):
    """Raised when the interior-optimum condition fails; the maximum then
    sits at the smallest admissible ask distance."""

    boundary_distance = 1.0


class LatencyTooLarge(ValueError):
    pass


class ModelUnavailable(ValueError):
    pass


class InsufficientBuckets(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class FeePolicy:
    level: int
    taker: float  # proportional fee on liquidity-removing executions
    maker: float

    @property
    def f_minus(self) -> float:
        return 1.0 + self.taker

    @property
    def f_plus(self) -> float:
        return 1.0 + self.maker


#: Spot fee schedule by 30-day turnover level (level 1 lowest turnover).
FEE_TABLE: dict[int, FeePolicy] = {
    1: FeePolicy(1, 0.006, 0.004),
    2: FeePolicy(2, 0.004, 0.0025),
    3: FeePolicy(3, 0.0025, 0.0015),
    4: FeePolicy(4, 0.002, 0.001),
    5: FeePolicy(5, 0.0018, 0.0008),
    6: FeePolicy(6, 0.0016, 0.0006),
    7: FeePolicy(7, 0.0012, 0.0003),
    8: FeePolicy(8, 0.0008, 0.0),
    9: FeePolicy(9, 0.0005, 0.0),
}

ZERO_FEES = FeePolicy(0, 0.0, 0.0)


@dataclass(slots=True)
class MarketSnapshot:
    """Quote state at decision time; prices in quote units."""

    best_bid: float
    best_ask: float
    tick_size: float
    features: FeatureVector | None = None

    def __post_init__(self) -> None:
        spread = (self.best_ask - self.best_bid) / self.tick_size
        if abs(spread - round(spread)) > 1e-6 or round(spread) < 1:
            raise ValueError(f"spread must be a positive whole number of ticks, got {spread}")

    @property
    def mid(self) -> float:
        return (self.best_ask + self.best_bid) / 2.0

    @property
    def spread_ticks(self) -> int:
        return int(round((self.best_ask - self.best_bid) / self.tick_size))


@dataclass
class PlacementDecision:
    action: str  # "market" or "limit"
    distance: int | None  # ticks, only for limit
    saved_cost: float  # at the optimum, quote units
    break_even_fill: float | None
    curve: list[dict] = field(default_factory=list)  # per-distance diagnostics


# ---------------------------------------------------------------------------
# Cost primitives
# ---------------------------------------------------------------------------


def immediate_cost(snapshot: MarketSnapshot, fees: FeePolicy) -> float:
    """Deterministic cost of crossing the spread now, relative to mid."""
    return fees.f_minus * snapshot.best_ask - snapshot.mid


def _check_admissible(snapshot: MarketSnapshot, delta: int) -> None:
    if delta != int(delta) or delta <= -snapshot.spread_ticks:
        raise InadmissibleDistance(
            f"delta must be an integer > {-snapshot.spread_ticks}, got {delta}"
        )


def saved_cost(
    snapshot: MarketSnapshot,
    delta: int,
    fees: FeePolicy,
    fill_probability: float,
    cleanup_ticks: float,
) -> float:
    """Expected cost reduction of posting at ``delta`` versus crossing now."""
    _check_admissible(snapshot, delta)
    if not 0.0 <= fill_probability <= 1.0:
        raise ValueError(f"fill probability must be in [0, 1], got {fill_probability}")
    alpha = snapshot.tick_size
    gain = fees.f_minus * snapshot.best_ask - fees.f_plus * (snapshot.best_bid - alpha * delta)
    return fill_probability * gain - (1.0 - fill_probability) * fees.f_minus * alpha * cleanup_ticks


def break_even_fill(snapshot: MarketSnapshot, delta: int, fees: FeePolicy, cleanup_ticks: float) -> float:
    """Fill probability at which the saved cost crosses zero."""
    _check_admissible(snapshot, delta)
    alpha = snapshot.tick_size
    gain = fees.f_minus * snapshot.best_ask - fees.f_plus * (snapshot.best_bid - alpha * delta)
    loss = fees.f_minus * alpha * cleanup_ticks
    denom = gain + loss
    if denom <= 0:
        raise NonpositiveDenominator("posting never pays at this distance; cross the spread")
    return loss / denom


# ---------------------------------------------------------------------------
# Optimal distance
# ---------------------------------------------------------------------------


def features_for_distance(
    base: FeatureVector, snapshot: MarketSnapshot, quantity: float, delta: int
) -> FeatureVector:
    """Candidate-order covariates: only distance-dependent fields move.

    Book-level state is frozen at decision time; an aggressive candidate
    starts a fresh queue so its priority volume is zero.
    """
    spread = snapshot.spread_ticks
    omega = delta / (1.0 - spread) if (delta < 0 and spread > 1) else None
    return FeatureVector(
        delta=float(delta),
        spread=float(spread),
        spread_after=float(min(spread, spread + delta)),
        best_imbalance=base.best_imbalance,
        add_imbalance=base.add_imbalance,
        aggressiveness=omega,
        prior_volume=0.0 if delta < 0 else base.prior_volume,
        size=float(quantity),
        signed_flow=base.signed_flow,
        flow_imbalance=base.flow_imbalance,
        signed_traded=base.signed_traded,
        traded_imbalance=base.traded_imbalance,
        time_since_trade=base.time_since_trade,
        median_trade_duration=base.median_trade_duration,
        volatility=base.volatility,
        partial_window=base.partial_window,
    )


def optimal_distance(
    snapshot: MarketSnapshot,
    quantity: float,
    fees: FeePolicy,
    fill_model,
    cleanup_model,
    delta_range: tuple[int, int] | None = None,
) -> PlacementDecision:
    """Exhaustive integer sweep of the saved cost over admissible distances.

    Ties break toward the least aggressive (largest) distance; the market
    tactic wins whenever no distance keeps a positive saved cost.
    """
    if fill_model is None or cleanup_model is None:
        raise ModelUnavailable("both fill and clean-up models are required")
    if snapshot.features is None:
        raise ModelUnavailable("snapshot carries no feature state")
    spread = snapshot.spread_ticks
    lo, hi = delta_range if delta_range is not None else (-spread + 1, max(1, 2 * spread))
    if lo <= -spread:
        raise InadmissibleDistance(f"range start {lo} is not admissible for spread {spread}")
    best_delta = None
    best_s = -math.inf
    curve: list[dict] = []
    for delta in range(lo, hi + 1):
        z = features_for_distance(snapshot.features, snapshot, quantity, delta)
        f = float(fill_model.predict(z))
        v = float(cleanup_model.predict(z))
        s = saved_cost(snapshot, delta, fees, f, v)
        curve.append({"delta": delta, "fill_probability": f, "cleanup_ticks": v, "saved_cost": s})
        if s >= best_s:  # ascending sweep, so ties resolve to the largest delta
            best_s = s
            best_delta = delta
    if best_s <= 0 or best_delta is None:
        return PlacementDecision("market", None, best_s, None, curve)
    z_best = features_for_distance(snapshot.features, snapshot, quantity, best_delta)
    v_best = float(cleanup_model.predict(z_best))
    try:
        be = break_even_fill(snapshot, best_delta, fees, v_best)
    except NonpositiveDenominator:
        be = None
    return PlacementDecision("limit", best_delta, best_s, be, curve)


# ---------------------------------------------------------------------------
# Exponential toy model
# ---------------------------------------------------------------------------


@dataclass
class ToyModel:
    """Fill probability ``A * exp(-k * d)`` of the ask-relative distance ``d``,
    constant clean-up cost, unit fee factors."""

    amplitude: float  # A
    decay: float  # k
    cleanup: float  # ticks

    def __post_init__(self) -> None:
        if not 0.0 < self.amplitude <= 1.0:
            raise ValueError(f"amplitude must be in (0, 1], got {self.amplitude}")
        if self.decay <= 0:
            raise ValueError(f"decay must be positive, got {self.decay}")

    def fill_probability(self, ask_distance: float) -> float:
        return self.amplitude * math.exp(-self.decay * ask_distance)

    def saved_cost(self, ask_distance) -> np.ndarray | float:
        d = np.asarray(ask_distance, dtype=float)
        f = self.amplitude * np.exp(-self.decay * d)
        out = f * d - (1.0 - f) * self.cleanup
        return float(out) if out.ndim == 0 else out

    @property
    def interior_condition(self) -> bool:
        return self.decay * (1.0 + self.cleanup) <= 1.0

    def optimal_distance(self) -> float:
        """Closed-form maximizer; only interior when ``k (1 + V) <= 1``."""
        if not self.interior_condition:
            raise ConditionViolated(
                f"k (1 + V) = {self.decay * (1 + self.cleanup):.4f} > 1; optimum sits at the boundary d = 1"
            )
        return 1.0 / self.decay - self.cleanup

    def optimal_saved_cost(self) -> float:
        self.optimal_distance()  # re-raise on boundary cases
        return (self.amplitude / self.decay) * math.exp(self.decay * self.cleanup - 1.0) - self.cleanup


def fit_toy_model(
    ask_distances: Sequence[float],
    fill_probabilities: Sequence[float],
    cleanup: float,
    flat_tolerance: float = 1e-6,
) -> tuple[ToyModel, bool]:
    """Least-squares exponential fit of per-distance fill probabilities.

    Returns the fitted model and a flag raised when the decay is
    indistinguishable from flat.  Buckets with zero fill probability cannot
    enter the log fit and are dropped.
    """
    pairs = [(d, f) for d, f in zip(ask_distances, fill_probabilities) if f > 0]
    if len(pairs) < 3:
        raise InsufficientBuckets(f"need at least 3 positive-probability buckets, got {len(pairs)}")
    d = np.array([p[0] for p in pairs])
    logf = np.log(np.array([p[1] for p in pairs]))
    slope, intercept = np.polyfit(d, logf, 1)
    amplitude = min(float(np.exp(intercept)), 1.0)
    decay = max(-float(slope), flat_tolerance)
    flat = -float(slope) < flat_tolerance
    return ToyModel(amplitude=amplitude, decay=decay, cleanup=cleanup), flat


# ---------------------------------------------------------------------------
# Latency-sensitive saved cost
# ---------------------------------------------------------------------------


def latency_saved_cost(
    snapshot: MarketSnapshot,
    delta: int,
    fees: FeePolicy,
    fill_probability: float,
    cleanup_ticks: float,
    move_cdf: Callable[[float], float],
    tail_mean: Callable[[float], float] | float,
    latency: float,
    horizon: float,
) -> float:
    """Saved cost corrected for ask improvements arriving within the latency.

    ``move_cdf`` is the CDF of the ask move (ticks) over the latency window;
    ``tail_mean`` gives the conditional mean move at or below a threshold.
    When no mass sits below ``-(spread + delta)`` the correction vanishes and
    the plain saved cost comes back exactly.
    """
    if latency <= 0 or horizon <= 0 or latency / horizon >= 1e-2:
        raise LatencyTooLarge(f"latency/horizon must be below 1e-2, got {latency / horizon if horizon else math.inf}")
    s = saved_cost(snapshot, delta, fees, fill_probability, cleanup_ticks)
    threshold = -(snapshot.spread_ticks + delta)
    p_cross = float(move_cdf(threshold))
    if p_cross == 0.0:
        return s
    mean_move = tail_mean(threshold) if callable(tail_mean) else float(tail_mean)
    return (1.0 - p_cross) * s - p_cross * fees.f_minus * snapshot.tick_size * mean_move


def point_mass_move(value: float, probability: float) -> tuple[Callable[[float], float], Callable[[float], float]]:
    """(CDF, tail mean) of a two-point ask-move law: ``value`` w.p. ``probability``, else 0."""

    def cdf(x: float) -> float:
        out = 0.0
        if value <= x:
            out += probability
        if 0.0 <= x:
            out += 1.0 - probability
        return out

    def tail(x: float) -> float:
        mass = value_mass = 0.0
        if value <= x:
            mass += probability
            value_mass += probability * value
        if 0.0 <= x:
            mass += 1.0 - probability
        return value_mass / mass if mass > 0 else 0.0

    return cdf, tail


def empirical_move_distribution(moves: Sequence[float]) -> tuple[Callable[[float], float], Callable[[float], float]]:
    """(CDF, tail mean) of observed latency-window ask moves."""
    arr = np.sort(np.asarray(moves, dtype=float))
    if arr.size == 0:
        raise ValueError("no observed moves")

    def cdf(x: float) -> float:
        return float(np.searchsorted(arr, x, side="right")) / arr.size

    def tail(x: float) -> float:
        k = int(np.searchsorted(arr, x, side="right"))
        return float(arr[:k].mean()) if k > 0 else 0.0

    return cdf, tail


def distance_spread_surface(
    snapshot: MarketSnapshot,
    quantity: float,
    fees: FeePolicy,
    fill_model,
    cleanup_model,
    spreads: Sequence[int],
    depth: int = 20,
) -> list[dict]:
    """Saved-cost surface over hypothetical spreads, with the optimum marked.

    The best bid and the non-distance features are held at the snapshot's
    values while the ask moves to realize each spread.
    """
    rows: list[dict] = []
    for spread in spreads:
        if spread < 1:
            continue
        hypo = MarketSnapshot(
            best_bid=snapshot.best_bid,
            best_ask=snapshot.best_bid + spread * snapshot.tick_size,
            tick_size=snapshot.tick_size,
            features=snapshot.features,
        )
        decision = optimal_distance(hypo, quantity, fees, fill_model, cleanup_model, (-spread + 1, depth))
        for cell in decision.curve:
            rows.append(
                {
                    "spread": spread,
                    "delta": cell["delta"],
                    "saved_cost": cell["saved_cost"],
                    "fill_probability": cell["fill_probability"],
                    "cleanup_ticks": cell["cleanup_ticks"],
                    "is_optimum": cell["delta"] == decision.distance,
                }
            )
    return rows


# ---------------------------------------------------------------------------
# Decision map
# ---------------------------------------------------------------------------


def decision_map(
    snapshot: MarketSnapshot,
    cleanup_ticks: float,
    fill_grid: Sequence[float],
    levels: Sequence[int] = tuple(range(1, 10)),
    delta: int = 0,
) -> list[dict]:
    """Limit/market cells over fee levels and fill probabilities."""
    cells = []
    for level in levels:
        fees = FEE_TABLE[level]
        try:
            boundary = break_even_fill(snapshot, delta, fees, cleanup_ticks)
        except NonpositiveDenominator:
            boundary = None
        for f in fill_grid:
            s = saved_cost(snapshot, delta, fees, f, cleanup_ticks)
            cells.append(
                {
                    "level": level,
                    "fill_probability": float(f),
                    "saved_cost": s,
                    "action": "limit" if s > 0 else "market",
                    "break_even": boundary,
                }
            )
    return cells
