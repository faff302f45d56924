"""Covariate state observed when a limit order enters the book.

The vector mixes snapshot quantities (distance, spread, queue imbalance,
priority volume) with rolling-window quantities computed over the last
``m`` events and the last ``m`` trades (signed flows, trade durations,
realized volatility).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .book import BookState, EmptySideError
from .messages import MessageKind, Side


class SpreadTooNarrow(ValueError):
    pass


class InsufficientTrades(ValueError):
    pass


#: Column layout of the model matrix.  ``aggressiveness`` is zero-imputed for
#: non-aggressive rows; the two trailing indicators encode the placement
#: regime so a pooled model can distinguish them.
FEATURE_COLUMNS = (
    "delta",
    "spread",
    "spread_after",
    "best_imbalance",
    "add_imbalance",
    "aggressiveness",
    "prior_volume",
    "size",
    "signed_flow",
    "flow_imbalance",
    "signed_traded",
    "traded_imbalance",
    "time_since_trade",
    "median_trade_duration",
    "volatility",
    "is_at_best",
    "is_aggressive",
)


@dataclass(slots=True)
class FeatureVector:
    delta: float  # ticks to the same-side best before insertion
    spread: float  # ticks, before insertion
    spread_after: float  # ticks, after insertion
    best_imbalance: float
    add_imbalance: float
    aggressiveness: float | None  # only when delta < 0 and spread > 1
    prior_volume: float
    size: float
    signed_flow: float
    flow_imbalance: float
    signed_traded: float
    traded_imbalance: float
    time_since_trade: float  # seconds
    median_trade_duration: float  # seconds
    volatility: float  # percent per trade
    partial_window: bool = False

    def to_row(self) -> np.ndarray:
        return np.array(
            [
                self.delta,
                self.spread,
                self.spread_after,
                self.best_imbalance,
                self.add_imbalance,
                0.0 if self.aggressiveness is None else self.aggressiveness,
                self.prior_volume,
                self.size,
                self.signed_flow,
                self.flow_imbalance,
                self.signed_traded,
                self.traded_imbalance,
                self.time_since_trade,
                self.median_trade_duration,
                self.volatility,
                1.0 if self.delta == 0 else 0.0,
                1.0 if self.delta < 0 else 0.0,
            ]
        )


class RollingWindows:
    """Bounded event and trade buffers feeding the differential features."""

    def __init__(self, event_window: int = 50, trade_window: int = 50):
        self.event_window = event_window
        self.trade_window = trade_window
        self.events: deque[tuple[Side, MessageKind, float]] = deque(maxlen=event_window)
        self.trades: deque[tuple[int, Side, float, int]] = deque(maxlen=trade_window)
        self.trades_seen = 0
        self.start_ts: int | None = None

    def push_event(self, side: Side, kind: MessageKind, size: float) -> None:
        self.events.append((side, kind, size))

    def push_trade(self, ts: int, resting_side: Side, size: float, price: int) -> None:
        self.trades.append((ts, resting_side, size, price))
        self.trades_seen += 1

    def note_start(self, ts: int) -> None:
        if self.start_ts is None:
            self.start_ts = ts

    # -- window reductions -------------------------------------------------

    def added_volume(self) -> tuple[float, float]:
        bid = sum(s for side, kind, s in self.events if kind is MessageKind.ADD and side is Side.BID)
        ask = sum(s for side, kind, s in self.events if kind is MessageKind.ADD and side is Side.ASK)
        return bid, ask

    def net_flow(self) -> tuple[float, float]:
        """Net liquidity change per side: adds positive, removals negative."""
        bid = ask = 0.0
        for side, kind, size in self.events:
            signed = size if kind is MessageKind.ADD else -size
            if side is Side.BID:
                bid += signed
            else:
                ask += signed
        return bid, ask

    def traded_volume(self) -> tuple[float, float]:
        bid = sum(s for _, side, s, _ in self.trades if side is Side.BID)
        ask = sum(s for _, side, s, _ in self.trades if side is Side.ASK)
        return bid, ask

    def trade_prices(self) -> list[int]:
        return [p for _, _, _, p in self.trades]

    def trade_timestamps(self) -> list[int]:
        return [ts for ts, _, _, _ in self.trades]


# ---------------------------------------------------------------------------
# Individual features
# ---------------------------------------------------------------------------


def distance_at_insertion(side: Side, price: int, best_bid: int | None, best_ask: int | None) -> int:
    """Ticks between the order price and the same-side best before insertion."""
    if side is Side.BID:
        if best_bid is None:
            raise EmptySideError("no best bid before insertion")
        return best_bid - price
    if best_ask is None:
        raise EmptySideError("no best ask before insertion")
    return price - best_ask


def best_imbalance(q_bid: float, q_ask: float) -> float:
    total = q_bid + q_ask
    if total <= 0:
        raise EmptySideError("both best queues empty")
    return (q_bid - q_ask) / total


def best_imbalance_after(book_after: BookState) -> float:
    return best_imbalance(book_after.best_queue_size(Side.BID), book_after.best_queue_size(Side.ASK))


def limit_flow_imbalance(windows: RollingWindows) -> float:
    """Imbalance of added volume over the event window, current order included."""
    bid, ask = windows.added_volume()
    total = bid + ask
    if total <= 0:
        raise ValueError("window holds no added volume; push the order first")
    return (bid - ask) / total


def aggressiveness_index(delta: float, spread: float) -> float:
    """Spread narrowing of an in-spread order: 0 at the best, 1 at a 1-tick spread."""
    if spread <= 1:
        raise SpreadTooNarrow(f"spread must exceed 1 tick, got {spread}")
    if not -spread < delta <= 0:
        raise ValueError(f"delta must be in (-spread, 0], got {delta}")
    return delta / (1.0 - spread)


def priority_volume(book_after: BookState, order_id: str) -> float:
    return book_after.priority_volume(order_id)


def realized_volatility(prices: Sequence[float]) -> float:
    """Root mean squared log-return of consecutive trade prices, per trade."""
    if len(prices) < 2:
        raise InsufficientTrades("need at least two trade prices")
    arr = np.asarray(prices, dtype=float)
    rets = np.diff(np.log(arr))
    return float(np.sqrt(np.mean(rets**2)))


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------


def signed_event_flow(windows: RollingWindows) -> tuple[float, float]:
    """(signed flow, flow imbalance) with the bid-positive convention."""
    bid, ask = windows.net_flow()
    signed = bid - ask
    denom = abs(bid) + abs(ask)
    return signed, signed / denom if denom > 0 else 0.0


def signed_traded_flow(windows: RollingWindows) -> tuple[float, float]:
    """(signed traded volume, traded imbalance) from the taker's viewpoint."""
    v_bid, v_ask = windows.traded_volume()
    signed = v_ask - v_bid
    total = v_ask + v_bid
    return signed, signed / total if total > 0 else 0.0


def assemble_features(
    *,
    side: Side,
    price: int,
    size: float,
    ts: int,
    best_bid_before: int | None,
    best_ask_before: int | None,
    book_after: BookState,
    order_id: str,
    windows: RollingWindows,
) -> FeatureVector:
    """Full covariate snapshot for an order just inserted into ``book_after``.

    The event window must already include the insertion.  Rows computed on a
    partial trade window are flagged; training drops them by default.
    """
    delta = distance_at_insertion(side, price, best_bid_before, best_ask_before)
    if best_bid_before is None or best_ask_before is None:
        raise EmptySideError("spread requires both sides before insertion")
    spread = best_ask_before - best_bid_before
    spread_after = book_after.spread_ticks()

    omega: float | None = None
    if delta < 0 and spread > 1:
        omega = aggressiveness_index(delta, spread)

    signed_flow, flow_imb = signed_event_flow(windows)
    signed_traded, traded_imb = signed_traded_flow(windows)

    partial = windows.trades_seen < windows.trade_window
    trade_ts = windows.trade_timestamps()
    if trade_ts:
        time_since_trade = (ts - trade_ts[-1]) / 1e9
    else:
        time_since_trade = (ts - (windows.start_ts if windows.start_ts is not None else ts)) / 1e9
        partial = True
    if len(trade_ts) >= 2:
        durations = np.diff(np.asarray(trade_ts, dtype=float)) / 1e9
        median_dur = float(np.median(durations))
    else:
        median_dur = 0.0
        partial = True
    prices = windows.trade_prices()
    try:
        vol = 100.0 * realized_volatility(prices)
    except InsufficientTrades:
        vol = 0.0
        partial = True

    return FeatureVector(
        delta=float(delta),
        spread=float(spread),
        spread_after=float(spread_after),
        best_imbalance=best_imbalance_after(book_after),
        add_imbalance=limit_flow_imbalance(windows),
        aggressiveness=omega,
        prior_volume=priority_volume(book_after, order_id),
        size=float(size),
        signed_flow=signed_flow,
        flow_imbalance=flow_imb,
        signed_traded=signed_traded,
        traded_imbalance=traded_imb,
        time_since_trade=time_since_trade,
        median_trade_duration=median_dur,
        volatility=vol,
        partial_window=partial,
    )
