"""Price-time-priority order book maintained from a level-3 message stream.

Executions consume liquidity from the FIFO head of the referenced order's
price level, so a single execute message may sweep several queue entries.
The book never accepts a message that would cross it; callers decide whether
to abort or to skip-and-flag.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field

from .messages import Level3Message, MessageKind, Side


class BookError(Exception):
    pass


class UnknownOrderId(BookError):
    pass


class SequenceGap(BookError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"expected seq {expected}, got {got}")
        self.expected = expected
        self.got = got


class CrossedBook(BookError):
    pass


class EmptySideError(BookError):
    pass


@dataclass(slots=True)
class Fill:
    order_id: str
    size: float
    price: int
    side: Side  # resting side
    exhausted: bool  # True when the resting order is fully consumed


@dataclass(slots=True)
class ApplyEffect:
    """What a message did to the book, for lifecycle bookkeeping."""

    kind: MessageKind
    order_id: str
    side: Side
    price: int
    added_size: float = 0.0
    cancelled_size: float = 0.0
    fills: list[Fill] = field(default_factory=list)
    unconsumed: float = 0.0  # execute size left over after the level emptied


class BookState:
    """Mutable book: price level -> FIFO queue of [order_id, remaining]."""

    def __init__(self) -> None:
        self.bids: dict[int, deque[list]] = {}
        self.asks: dict[int, deque[list]] = {}
        self._orders: dict[str, tuple[Side, int]] = {}
        self._bid_heap: list[int] = []  # negated prices
        self._ask_heap: list[int] = []
        self.last_seq: int | None = None

    # -- queries ---------------------------------------------------------

    def _levels(self, side: Side) -> dict[int, deque[list]]:
        return self.bids if side is Side.BID else self.asks

    def best_bid(self) -> int | None:
        while self._bid_heap:
            price = -self._bid_heap[0]
            if price in self.bids:
                return price
            heapq.heappop(self._bid_heap)
        return None

    def best_ask(self) -> int | None:
        while self._ask_heap:
            price = self._ask_heap[0]
            if price in self.asks:
                return price
            heapq.heappop(self._ask_heap)
        return None

    def best_price(self, side: Side) -> int | None:
        return self.best_bid() if side is Side.BID else self.best_ask()

    def mid(self) -> float:
        bb, ba = self.best_bid(), self.best_ask()
        if bb is None or ba is None:
            raise EmptySideError("mid requires both sides")
        return (bb + ba) / 2.0

    def spread_ticks(self) -> int:
        bb, ba = self.best_bid(), self.best_ask()
        if bb is None or ba is None:
            raise EmptySideError("spread requires both sides")
        return ba - bb

    def queue_at(self, side: Side, price: int) -> deque[list]:
        return self._levels(side).get(price, deque())

    def level_size(self, side: Side, price: int) -> float:
        return sum(entry[1] for entry in self.queue_at(side, price))

    def best_queue_size(self, side: Side) -> float:
        price = self.best_price(side)
        if price is None:
            raise EmptySideError(f"no {side.value} liquidity")
        return self.level_size(side, price)

    def contains(self, order_id: str) -> bool:
        return order_id in self._orders

    def order_info(self, order_id: str) -> tuple[Side, int, float]:
        """(side, price, remaining) of a live order."""
        try:
            side, price = self._orders[order_id]
        except KeyError:
            raise UnknownOrderId(order_id) from None
        for entry in self._levels(side)[price]:
            if entry[0] == order_id:
                return side, price, entry[1]
        raise UnknownOrderId(order_id)

    def priority_volume(self, order_id: str) -> float:
        """Size resting at strictly better prices plus same-price size ahead."""
        side, price, _ = self.order_info(order_id)
        levels = self._levels(side)
        better = (
            (p for p in levels if p > price) if side is Side.BID else (p for p in levels if p < price)
        )
        total = sum(self.level_size(side, p) for p in better)
        for entry in levels[price]:
            if entry[0] == order_id:
                break
            total += entry[1]
        return total

    def level_rank(self, side: Side, price: int) -> int:
        """1-based rank of a price among the side's occupied levels, best first."""
        levels = self._levels(side)
        if price not in levels:
            raise UnknownOrderId(f"no level at {price}")
        if side is Side.BID:
            return 1 + sum(1 for p in levels if p > price)
        return 1 + sum(1 for p in levels if p < price)

    def ahead_in_queue(self, order_id: str) -> list[tuple[str, float]]:
        """FIFO entries ahead of an order at its own price level."""
        side, price, _ = self.order_info(order_id)
        out: list[tuple[str, float]] = []
        for entry in self._levels(side)[price]:
            if entry[0] == order_id:
                return out
            out.append((entry[0], entry[1]))
        raise UnknownOrderId(order_id)

    # -- mutation --------------------------------------------------------

    def apply(self, msg: Level3Message, allow_gap: bool = False) -> ApplyEffect:
        """Apply one message; raises before mutating on any rejection."""
        msg.validate()
        if self.last_seq is not None and msg.seq != self.last_seq + 1 and not allow_gap:
            raise SequenceGap(self.last_seq + 1, msg.seq)

        if msg.kind is MessageKind.ADD:
            effect = self._apply_add(msg)
        elif msg.kind is MessageKind.CANCEL:
            effect = self._apply_cancel(msg)
        else:
            effect = self._apply_execute(msg)
        self.last_seq = msg.seq
        return effect

    def _apply_add(self, msg: Level3Message) -> ApplyEffect:
        if msg.order_id in self._orders:
            raise BookError(f"duplicate order id {msg.order_id}")
        if msg.side is Side.BID:
            ba = self.best_ask()
            if ba is not None and msg.price >= ba:
                raise CrossedBook(f"bid {msg.price} >= best ask {ba}")
        else:
            bb = self.best_bid()
            if bb is not None and msg.price <= bb:
                raise CrossedBook(f"ask {msg.price} <= best bid {bb}")
        levels = self._levels(msg.side)
        if msg.price not in levels:
            levels[msg.price] = deque()
            if msg.side is Side.BID:
                heapq.heappush(self._bid_heap, -msg.price)
            else:
                heapq.heappush(self._ask_heap, msg.price)
        levels[msg.price].append([msg.order_id, msg.size])
        self._orders[msg.order_id] = (msg.side, msg.price)
        return ApplyEffect(MessageKind.ADD, msg.order_id, msg.side, msg.price, added_size=msg.size)

    def _apply_cancel(self, msg: Level3Message) -> ApplyEffect:
        side, price, remaining = self.order_info(msg.order_id)
        self._remove(side, price, msg.order_id)
        return ApplyEffect(MessageKind.CANCEL, msg.order_id, side, price, cancelled_size=remaining)

    def _apply_execute(self, msg: Level3Message) -> ApplyEffect:
        side, price, _ = self.order_info(msg.order_id)
        queue = self._levels(side)[price]
        remaining = msg.exec_size
        fills: list[Fill] = []
        while remaining > 1e-12 and queue:
            head = queue[0]
            take = min(head[1], remaining)
            head[1] -= take
            remaining -= take
            exhausted = head[1] <= 1e-12
            fills.append(Fill(head[0], take, price, side, exhausted))
            if exhausted:
                queue.popleft()
                del self._orders[head[0]]
        if not queue:
            self._levels(side).pop(price, None)
        # sub-epsilon residue is float noise from telescoping subtractions,
        # not real unfilled size
        unconsumed = remaining if remaining > 1e-9 else 0.0
        return ApplyEffect(MessageKind.EXECUTE, msg.order_id, side, price, fills=fills, unconsumed=unconsumed)

    def _remove(self, side: Side, price: int, order_id: str) -> None:
        queue = self._levels(side)[price]
        for i, entry in enumerate(queue):
            if entry[0] == order_id:
                del queue[i]
                break
        if not queue:
            self._levels(side).pop(price, None)
        del self._orders[order_id]
