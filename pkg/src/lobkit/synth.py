"""Synthetic level-3 flow with known, configurable ground truth.

Two persistent quote walls carry the best prices and follow a lazy tick
random walk with configurable drift; trade prints consume wall liquidity.
Tracked subject orders arrive at Poisson times, each with an exponential
lifetime whose cause-specific rates are piecewise-constant functions of the
insertion state; the rates and the implied true fill probabilities go to a
sidecar table so estimators can be validated order by order.

Feed-loss censoring is realized as pure sequence-number gaps: downstream
tracking censors every live order at a gap while the book itself stays
consistent, which makes each order's censoring time exponential and
independent of its lifetime.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import heapq

import numpy as np

from .book import BookState
from .messages import Level3Message, MessageKind, Side


@dataclass(frozen=True)
class PiecewiseMultiplier:
    """Piecewise-constant multiplier; values clamp outside the edge range."""

    edges: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.edges) != len(self.values) + 1:
            raise ValueError("need one more edge than values")
        if any(v <= 0 for v in self.values):
            raise ValueError("multipliers must stay positive")

    def at(self, x: float) -> float:
        idx = int(np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, len(self.values) - 1))
        return self.values[idx]


FLAT = PiecewiseMultiplier((-math.inf, math.inf), (1.0,))


@dataclass
class RegimeSpec:
    """One block of the cycling parameter schedule."""

    duration: float  # seconds
    exec_base: float = 0.8  # executions per second before multipliers
    cancel_base: float = 2.0
    move_rate: float = 2.0  # wall shifts per second
    up_probability: float = 0.5
    trade_rate: float = 4.0
    taker_buy_fraction: float = 0.5  # trades consuming the ask wall
    spread: int = 4  # wall spread, ticks

    @property
    def drift(self) -> float:
        """Expected ask move in ticks per second."""
        return self.move_rate * (2.0 * self.up_probability - 1.0)


@dataclass
class GroundTruthConfig:
    seed: int
    regimes: list[RegimeSpec] = field(default_factory=lambda: [RegimeSpec(duration=60.0)])
    subject_rate: float = 4.0
    subject_side: Side = Side.BID
    delta_choices: tuple[int, ...] = (0, 1, 2, 3, 4, 5)
    delta_weights: tuple[float, ...] | None = None
    size_range: tuple[float, float] = (0.5, 2.0)
    exec_delta_mult: PiecewiseMultiplier = FLAT
    exec_spread_mult: PiecewiseMultiplier = FLAT
    exec_imbalance_mult: PiecewiseMultiplier = FLAT
    cancel_delta_mult: PiecewiseMultiplier = FLAT
    cancel_spread_mult: PiecewiseMultiplier = FLAT
    cancel_imbalance_mult: PiecewiseMultiplier = FLAT
    censor_rate: float = 0.0  # feed gaps per second
    noise_rate: float = 2.0  # deep resting orders per second
    noise_cancel_rate: float = 1.0
    noise_depth_range: tuple[int, int] = (6, 30)
    wall_size: float = 60.0
    trade_size_range: tuple[float, float] = (0.4, 1.6)
    initial_bid: int = 50_000  # ticks
    horizon: float = 1.0  # seconds; drives the truth columns and arrival cutoff
    start_ts: int = 1_700_000_000_000_000_000  # ns epoch of the stream


@dataclass(slots=True)
class TruthRow:
    order_id: str
    lambda_exec: float
    lambda_cancel: float
    cif_exec: float
    cif_cancel: float
    pw_fill: float
    delta: int
    spread: int
    best_imbalance: float
    insert_ts: int
    regime: int


def hazard_rates(
    config: GroundTruthConfig,
    delta: float,
    spread: float,
    imbalance: float,
    regime: int = 0,
) -> tuple[float, float]:
    reg = config.regimes[regime % len(config.regimes)]
    lam1 = (
        reg.exec_base
        * config.exec_delta_mult.at(delta)
        * config.exec_spread_mult.at(spread)
        * config.exec_imbalance_mult.at(imbalance)
    )
    lam2 = (
        reg.cancel_base
        * config.cancel_delta_mult.at(delta)
        * config.cancel_spread_mult.at(spread)
        * config.cancel_imbalance_mult.at(imbalance)
    )
    return lam1, lam2


def competing_cif(lam1: float, lam2: float, horizon: float) -> float:
    total = lam1 + lam2
    if total == 0:
        return 0.0
    return lam1 / total * (1.0 - math.exp(-total * horizon))


def post_and_wait_probability(lam1: float, horizon: float) -> float:
    return 1.0 - math.exp(-lam1 * horizon)


def true_fill_probability(
    config: GroundTruthConfig,
    delta: float,
    spread: float,
    imbalance: float,
    horizon: float,
    mode: str = "cif",
    regime: int = 0,
) -> float:
    """Closed-form fill probability implied by the planted hazards."""
    lam1, lam2 = hazard_rates(config, delta, spread, imbalance, regime)
    if mode == "cif":
        return competing_cif(lam1, lam2, horizon)
    if mode == "post_and_wait":
        return post_and_wait_probability(lam1, horizon)
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# Generator
# ---------------------------------------------------------------------------

_ARRIVE, _MOVE, _TRADE, _DEATH, _NOISE_ARRIVE, _NOISE_CANCEL, _GAP, _SWITCH = range(8)


class _Generator:
    def __init__(self, config: GroundTruthConfig, duration: float):
        self.cfg = config
        self.duration = duration
        self.rng = np.random.default_rng(config.seed)
        self.book = BookState()
        self.messages: list[Level3Message] = []
        self.truth: list[TruthRow] = []
        self.seq = 0
        self.counter = 0
        self.heap: list[tuple[float, int, int, tuple]] = []
        self.regime_idx = 0
        self.wall_id = {Side.BID: "", Side.ASK: ""}
        self.wall_price = {Side.BID: 0, Side.ASK: 0}
        self.next_id = 0
        self.gap_pending = False
        self.skipped_moves = 0
        self.skipped_trades = 0
        self.skipped_subjects = 0

    # -- plumbing ----------------------------------------------------------

    def _push(self, t: float, kind: int, payload: tuple = ()) -> None:
        self.counter += 1
        heapq.heappush(self.heap, (t, self.counter, kind, payload))

    def _fresh_id(self, prefix: str) -> str:
        self.next_id += 1
        return f"{prefix}{self.next_id}"

    def _emit(self, t: float, kind: MessageKind, order_id: str, side: Side, price: int, size: float = 0.0, exec_size: float = 0.0) -> None:
        self.seq += 1
        if self.gap_pending:
            self.seq += int(self.rng.integers(2, 20))
            self.gap_pending = False
        msg = Level3Message(
            seq=self.seq,
            ts=self.cfg.start_ts + int(round(t * 1e9)),
            kind=kind,
            order_id=order_id,
            side=side,
            price=price,
            size=size,
            exec_size=exec_size,
        )
        self.book.apply(msg, allow_gap=True)
        self.messages.append(msg)

    def regime(self) -> RegimeSpec:
        return self.cfg.regimes[self.regime_idx % len(self.cfg.regimes)]

    # -- walls ---------------------------------------------------------------

    def _place_wall(self, t: float, side: Side, price: int) -> None:
        oid = self._fresh_id("w")
        self._emit(t, MessageKind.ADD, oid, side, price, size=self.cfg.wall_size)
        self.wall_id[side] = oid
        self.wall_price[side] = price

    def _move_walls(self, t: float, direction: int) -> None:
        new_bid = self.wall_price[Side.BID] + direction
        new_ask = self.wall_price[Side.ASK] + direction
        if new_bid <= 0:
            self.skipped_moves += 1
            return
        # moving down may not cross resting bids; moving up may not cross asks
        blocking_bid = self._best_non_wall(Side.BID)
        blocking_ask = self._best_non_wall(Side.ASK)
        if direction < 0 and blocking_bid is not None and new_ask <= blocking_bid:
            self.skipped_moves += 1
            return
        if direction > 0 and blocking_ask is not None and new_bid >= blocking_ask:
            self.skipped_moves += 1
            return
        first, second = (Side.ASK, Side.BID) if direction > 0 else (Side.BID, Side.ASK)
        for side in (first, second):
            price = new_bid if side is Side.BID else new_ask
            self._emit(t, MessageKind.CANCEL, self.wall_id[side], side, self.wall_price[side])
            self._place_wall(t, side, price)

    def _best_non_wall(self, side: Side) -> int | None:
        """Best resting price on a side ignoring that side's wall."""
        levels = self.book.bids if side is Side.BID else self.book.asks
        candidates = [
            p
            for p, q in levels.items()
            if any(e[0] != self.wall_id[side] for e in q)
        ]
        if not candidates:
            return None
        return max(candidates) if side is Side.BID else min(candidates)

    def _refresh_wall(self, t: float, side: Side) -> None:
        self._emit(t, MessageKind.CANCEL, self.wall_id[side], side, self.wall_price[side])
        self._place_wall(t, side, self.wall_price[side])

    # -- events ---------------------------------------------------------------

    def _on_trade(self, t: float) -> None:
        reg = self.regime()
        side = Side.ASK if self.rng.random() < reg.taker_buy_fraction else Side.BID
        wall = self.wall_id[side]
        price = self.wall_price[side]
        queue = self.book.queue_at(side, price)
        if not queue or queue[0][0] != wall:
            self.skipped_trades += 1
            return
        remaining = queue[0][1]
        size = float(self.rng.uniform(*self.cfg.trade_size_range))
        size = min(size, 0.5 * remaining)
        if size <= 0:
            self.skipped_trades += 1
            return
        self._emit(t, MessageKind.EXECUTE, wall, side, price, exec_size=size)
        queue = self.book.queue_at(side, price)
        if not queue or queue[0][0] != wall:
            return
        if queue[0][1] < max(self.cfg.trade_size_range):
            self._refresh_wall(t, side)

    def _on_subject_arrival(self, t: float) -> None:
        cfg = self.cfg
        side = cfg.subject_side
        best_bid = self.book.best_bid()
        best_ask = self.book.best_ask()
        if best_bid is None or best_ask is None:
            self.skipped_subjects += 1
            return
        spread = best_ask - best_bid
        weights = cfg.delta_weights
        probs = None if weights is None else np.asarray(weights) / np.sum(weights)
        for _ in range(4):
            delta = int(self.rng.choice(cfg.delta_choices, p=probs))
            if side is Side.BID:
                price = best_bid - delta
                crossing = price >= best_ask
            else:
                price = best_ask + delta
                crossing = price <= best_bid
            if price <= 0 or crossing:
                continue
            level = self.book.queue_at(side, price)
            if level and delta != 0:
                continue  # keep each subject alone at its level
            if level and delta == 0 and any(e[0].startswith("s") for e in level):
                continue  # one subject per best queue
            oid = self._fresh_id("s")
            size = float(self.rng.uniform(*cfg.size_range))
            self._emit(t, MessageKind.ADD, oid, side, price, size=size)
            q_bid = self.book.best_queue_size(Side.BID)
            q_ask = self.book.best_queue_size(Side.ASK)
            imbalance = (q_bid - q_ask) / (q_bid + q_ask)
            lam1, lam2 = hazard_rates(self.cfg, delta, spread, imbalance, self.regime_idx)
            total = lam1 + lam2
            lifetime = float(self.rng.exponential(1.0 / total)) if total > 0 else math.inf
            cause_exec = bool(self.rng.random() < (lam1 / total if total > 0 else 0.0))
            if math.isfinite(lifetime):
                self._push(t + lifetime, _DEATH, (oid, cause_exec))
            self.truth.append(
                TruthRow(
                    order_id=oid,
                    lambda_exec=lam1,
                    lambda_cancel=lam2,
                    cif_exec=competing_cif(lam1, lam2, cfg.horizon),
                    cif_cancel=competing_cif(lam2, lam1, cfg.horizon),
                    pw_fill=post_and_wait_probability(lam1, cfg.horizon),
                    delta=delta,
                    spread=spread,
                    best_imbalance=imbalance,
                    insert_ts=cfg.start_ts + int(round(t * 1e9)),
                    regime=self.regime_idx % len(cfg.regimes),
                )
            )
            return
        self.skipped_subjects += 1

    def _on_death(self, t: float, order_id: str, executed: bool) -> None:
        if not self.book.contains(order_id):
            return
        side, price, remaining = self.book.order_info(order_id)
        if not executed:
            self._emit(t, MessageKind.CANCEL, order_id, side, price)
            return
        ahead = self.book.ahead_in_queue(order_id)
        exec_size = sum(size for _, size in ahead) + remaining
        head = ahead[0][0] if ahead else order_id
        wall_consumed = any(oid == self.wall_id[side] for oid, _ in ahead)
        self._emit(t, MessageKind.EXECUTE, head, side, price, exec_size=exec_size)
        if wall_consumed:
            self._place_wall(t, side, price)

    def _on_noise_arrival(self, t: float) -> None:
        cfg = self.cfg
        best_bid = self.book.best_bid()
        best_ask = self.book.best_ask()
        if best_bid is None or best_ask is None:
            return
        side = Side.BID if self.rng.random() < 0.5 else Side.ASK
        depth = int(self.rng.integers(cfg.noise_depth_range[0], cfg.noise_depth_range[1] + 1))
        price = best_bid - depth if side is Side.BID else best_ask + depth
        if price <= 0 or self.book.queue_at(side, price):
            return
        oid = self._fresh_id("n")
        self._emit(t, MessageKind.ADD, oid, side, price, size=float(self.rng.uniform(*cfg.size_range)))
        self._push(t + float(self.rng.exponential(1.0 / cfg.noise_cancel_rate)), _NOISE_CANCEL, (oid,))

    def _on_noise_cancel(self, t: float, order_id: str) -> None:
        if self.book.contains(order_id):
            side, price, _ = self.book.order_info(order_id)
            self._emit(t, MessageKind.CANCEL, order_id, side, price)

    # -- main loop --------------------------------------------------------------

    def run(self) -> tuple[list[Level3Message], list[TruthRow]]:
        cfg = self.cfg
        reg = self.regime()
        self._place_wall(0.0, Side.BID, cfg.initial_bid)
        self._place_wall(0.0, Side.ASK, cfg.initial_bid + reg.spread)

        def arm(kind: int, rate: float, now: float) -> None:
            if rate > 0:
                self._push(now + float(self.rng.exponential(1.0 / rate)), kind)

        arm(_ARRIVE, cfg.subject_rate, 0.0)
        arm(_MOVE, reg.move_rate, 0.0)
        arm(_TRADE, reg.trade_rate, 0.0)
        arm(_NOISE_ARRIVE, cfg.noise_rate, 0.0)
        arm(_GAP, cfg.censor_rate, 0.0)
        if len(cfg.regimes) > 1 or cfg.regimes[0].duration < self.duration:
            self._push(reg.duration, _SWITCH)

        arrival_cutoff = self.duration - 1.5 * cfg.horizon
        while self.heap:
            t, _, kind, payload = heapq.heappop(self.heap)
            if t >= self.duration:
                break
            reg = self.regime()
            if kind == _ARRIVE:
                if t < arrival_cutoff:
                    self._on_subject_arrival(t)
                arm(_ARRIVE, cfg.subject_rate, t)
            elif kind == _MOVE:
                direction = 1 if self.rng.random() < reg.up_probability else -1
                self._move_walls(t, direction)
                arm(_MOVE, reg.move_rate, t)
            elif kind == _TRADE:
                self._on_trade(t)
                arm(_TRADE, reg.trade_rate, t)
            elif kind == _DEATH:
                self._on_death(t, *payload)
            elif kind == _NOISE_ARRIVE:
                self._on_noise_arrival(t)
                arm(_NOISE_ARRIVE, cfg.noise_rate, t)
            elif kind == _NOISE_CANCEL:
                self._on_noise_cancel(t, *payload)
            elif kind == _GAP:
                self.gap_pending = True
                arm(_GAP, cfg.censor_rate, t)
            elif kind == _SWITCH:
                self.regime_idx += 1
                new = self.regime()
                self._push(t + new.duration, _SWITCH)
                # retarget the ask wall to the new spread when it stays uncrossed
                target_ask = self.wall_price[Side.BID] + new.spread
                best_bid = self.book.best_bid()
                if best_bid is not None and target_ask > best_bid and target_ask != self.wall_price[Side.ASK]:
                    self._emit(t, MessageKind.CANCEL, self.wall_id[Side.ASK], Side.ASK, self.wall_price[Side.ASK])
                    self._place_wall(t, Side.ASK, target_ask)
        return self.messages, self.truth


def generate_flow(config: GroundTruthConfig, duration: float) -> tuple[list[Level3Message], list[TruthRow]]:
    """Seed-deterministic stream plus its per-order truth sidecar."""
    return _Generator(config, duration).run()


# ---------------------------------------------------------------------------
# Sidecar IO
# ---------------------------------------------------------------------------

TRUTH_FIELDS = (
    "order_id",
    "lambda_exec",
    "lambda_cancel",
    "cif_exec",
    "cif_cancel",
    "pw_fill",
    "delta",
    "spread",
    "best_imbalance",
    "insert_ts",
    "regime",
)


def write_truth(path: str | Path, rows: Sequence[TruthRow]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRUTH_FIELDS)
        for r in rows:
            writer.writerow(
                [
                    r.order_id,
                    repr(r.lambda_exec),
                    repr(r.lambda_cancel),
                    repr(r.cif_exec),
                    repr(r.cif_cancel),
                    repr(r.pw_fill),
                    r.delta,
                    r.spread,
                    repr(r.best_imbalance),
                    r.insert_ts,
                    r.regime,
                ]
            )


def read_truth(path: str | Path) -> list[TruthRow]:
    rows = []
    with Path(path).open(newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                TruthRow(
                    order_id=rec["order_id"],
                    lambda_exec=float(rec["lambda_exec"]),
                    lambda_cancel=float(rec["lambda_cancel"]),
                    cif_exec=float(rec["cif_exec"]),
                    cif_cancel=float(rec["cif_cancel"]),
                    pw_fill=float(rec["pw_fill"]),
                    delta=int(rec["delta"]),
                    spread=int(rec["spread"]),
                    best_imbalance=float(rec["best_imbalance"]),
                    insert_ts=int(rec["insert_ts"]),
                    regime=int(rec["regime"]),
                )
            )
    return rows
