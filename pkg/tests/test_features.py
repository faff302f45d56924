import math

import pytest

from lobkit.book import EmptySideError
from lobkit.features import (
    FEATURE_COLUMNS,
    RollingWindows,
    SpreadTooNarrow,
    InsufficientTrades,
    aggressiveness_index,
    best_imbalance,
    distance_at_insertion,
    limit_flow_imbalance,
    realized_volatility,
)
from lobkit.messages import InstrumentConfig, Level3Message, MessageKind, Side
from lobkit.replay import track_lifecycles


def test_distance_bid_at_best_is_zero():
    assert distance_at_insertion(Side.BID, 100, 100, 104) == 0


def test_distance_bid_below_best():
    assert distance_at_insertion(Side.BID, 97, 100, 104) == 3


def test_distance_inside_spread_negative():
    assert distance_at_insertion(Side.BID, 102, 100, 104) == -2


def test_distance_ask_side_mirrors():
    assert distance_at_insertion(Side.ASK, 107, 100, 104) == 3
    assert distance_at_insertion(Side.ASK, 102, 100, 104) == -2


def test_distance_requires_same_side_best():
    with pytest.raises(EmptySideError):
        distance_at_insertion(Side.BID, 100, None, 104)


def test_best_imbalance_values():
    assert best_imbalance(5.0, 5.0) == 0.0
    assert best_imbalance(3.0, 1.0) == pytest.approx(0.5)
    assert best_imbalance(0.0, 4.0) == -1.0
    with pytest.raises(EmptySideError):
        best_imbalance(0.0, 0.0)


def test_limit_flow_imbalance_values():
    w = RollingWindows(event_window=50)
    w.push_event(Side.BID, MessageKind.ADD, 5.0)
    assert limit_flow_imbalance(w) == 1.0
    w.push_event(Side.ASK, MessageKind.ADD, 5.0)
    assert limit_flow_imbalance(w) == 0.0
    w2 = RollingWindows(event_window=50)
    w2.push_event(Side.BID, MessageKind.ADD, 30.0)
    w2.push_event(Side.ASK, MessageKind.ADD, 10.0)
    assert limit_flow_imbalance(w2) == pytest.approx(0.5)


def test_aggressiveness_index_endpoints():
    assert aggressiveness_index(0, 5) == 0.0
    assert aggressiveness_index(-4, 5) == pytest.approx(1.0)
    assert aggressiveness_index(-2, 5) == pytest.approx(0.5)
    with pytest.raises(SpreadTooNarrow):
        aggressiveness_index(0, 1)


def test_aggressiveness_two_forms_agree_exactly():
    # delta/(1 - spread) versus (spread - spread_after)/(spread - 1)
    for spread in range(2, 12):
        for delta in range(-spread + 1, 1):
            spread_after = spread + delta
            direct = aggressiveness_index(delta, spread)
            alternate = (spread - spread_after) / (spread - 1)
            assert direct == alternate


def test_realized_volatility_closed_forms():
    assert realized_volatility([100.0, 100.0, 100.0]) == 0.0
    r = 0.02
    prices = [100.0, 100.0 * (1 + r)] * 6
    assert realized_volatility(prices) == pytest.approx(abs(math.log(1 + r)))
    a, b, c = 0.01, -0.02, 0.003
    p0 = 50.0
    prices = [p0, p0 * math.exp(a), p0 * math.exp(a + b), p0 * math.exp(a + b + c)]
    assert realized_volatility(prices) == pytest.approx(math.sqrt((a * a + b * b + c * c) / 3))
    with pytest.raises(InsufficientTrades):
        realized_volatility([100.0])


# ---------------------------------------------------------------------------
# Assembly on a scripted stream
# ---------------------------------------------------------------------------


def _msg(seq, kind, oid, side, price, size=0.0, exec_size=0.0, ts=None):
    return Level3Message(seq, ts if ts is not None else seq * 10_000_000, kind, oid, side, price, size, exec_size)


def _scripted_stream():
    # wall book, two trades, then a passive and an aggressive subject order
    A, C, E, B, S = MessageKind.ADD, MessageKind.CANCEL, MessageKind.EXECUTE, Side.BID, Side.ASK
    return [
        _msg(1, A, "b1", B, 995, size=10),
        _msg(2, A, "a1", S, 1005, size=8),
        _msg(3, A, "b2", B, 990, size=4),
        _msg(4, A, "a2", S, 1010, size=6),
        _msg(5, E, "a1", S, 1005, exec_size=2),  # taker buy, 2 @ 1005
        _msg(6, E, "b1", B, 995, exec_size=3),  # taker sell, 3 @ 995
        _msg(7, A, "sub1", B, 992, size=5),  # passive subject, delta 3
        _msg(8, A, "sub2", B, 999, size=2),  # aggressive subject, delta -4
        _msg(9, C, "sub1", B, 992),
        _msg(10, C, "sub2", B, 999),
    ]


def _instrument(**kw):
    defaults = dict(tick_size=0.01, horizon=1.0, depth_mode="bps", depth_value=500.0, event_window=50, trade_window=50)
    defaults.update(kw)
    return InstrumentConfig(**defaults)


def test_assembled_features_match_hand_trace():
    result = track_lifecycles(_scripted_stream(), _instrument())
    by_id = {r.order_id: r for r in result.records}
    sub1 = by_id["sub1"].features
    # book before sub1: bids 995(b1,7),990(b2,4); asks 1005(a1,6),1010(a2,6)
    assert sub1.delta == 3.0
    assert sub1.spread == 10.0
    assert sub1.spread_after == 10.0
    assert sub1.aggressiveness is None
    # best queues after insertion: bid 7 @995, ask 6 @1005
    assert sub1.best_imbalance == pytest.approx((7 - 6) / 13)
    # added volume in window: bid 10+4+5=19, ask 8+6=14
    assert sub1.add_imbalance == pytest.approx((19 - 14) / 33)
    # net flow: bid 19-3=16, ask 14-2=12 -> signed 4, imbalance 4/28
    assert sub1.signed_flow == pytest.approx(4.0)
    assert sub1.flow_imbalance == pytest.approx(4.0 / 28.0)
    # trades: 2 on ask side, 3 on bid side (taker view: signed = ask - bid)
    assert sub1.signed_traded == pytest.approx(-1.0)
    assert sub1.traded_imbalance == pytest.approx(-1.0 / 5.0)
    # priority: better bid level holds 7, own level empty ahead
    assert sub1.prior_volume == pytest.approx(7.0)
    assert sub1.size == 5.0
    assert sub1.partial_window  # fewer than 50 trades seen

    sub2 = by_id["sub2"].features
    assert sub2.delta == -4.0
    assert sub2.aggressiveness == pytest.approx((-4.0) / (1.0 - 10.0))
    assert sub2.spread_after == 6.0
    assert sub2.prior_volume == 0.0  # new best queue
    assert by_id["sub2"].outcome.name == "CANCELLED"


def test_volatility_and_durations_from_trades():
    msgs = _scripted_stream()
    result = track_lifecycles(msgs, _instrument())
    sub1 = {r.order_id: r for r in result.records}["sub1"].features
    expected_vol = 100.0 * abs(math.log(995.0 / 1005.0))
    assert sub1.volatility == pytest.approx(expected_vol)
    # trades at ts 50ms and 60ms; subject inserted at 70ms
    assert sub1.time_since_trade == pytest.approx(0.01)
    assert sub1.median_trade_duration == pytest.approx(0.01)


def _mirror(messages):
    """Swap sides and reflect prices around a constant; a valid mirrored stream."""
    pivot = 2000
    out = []
    for m in messages:
        out.append(
            Level3Message(
                m.seq,
                m.ts,
                m.kind,
                m.order_id,
                m.side.opposite,
                pivot - m.price,
                m.size,
                m.exec_size,
            )
        )
    return out


def test_mirror_antisymmetry():
    base = track_lifecycles(_scripted_stream(), _instrument())
    mirrored = track_lifecycles(_mirror(_scripted_stream()), _instrument())
    for rec_b, rec_m in zip(base.records, mirrored.records):
        fb, fm = rec_b.features, rec_m.features
        assert fb.delta == fm.delta
        assert fb.spread == fm.spread
        assert fb.spread_after == fm.spread_after
        assert fb.prior_volume == fm.prior_volume
        assert (fb.aggressiveness is None) == (fm.aggressiveness is None)
        if fb.aggressiveness is not None:
            assert fb.aggressiveness == pytest.approx(fm.aggressiveness)
        assert fb.best_imbalance == pytest.approx(-fm.best_imbalance)
        assert fb.add_imbalance == pytest.approx(-fm.add_imbalance)
        assert fb.signed_flow == pytest.approx(-fm.signed_flow)
        assert fb.signed_traded == pytest.approx(-fm.signed_traded)
        assert fb.traded_imbalance == pytest.approx(-fm.traded_imbalance)
        assert fb.time_since_trade == fm.time_since_trade
        assert fb.median_trade_duration == fm.median_trade_duration
        # reflected prices do not preserve log returns exactly
        assert fb.volatility == pytest.approx(fm.volatility, rel=2e-2)


def test_feature_row_layout():
    result = track_lifecycles(_scripted_stream(), _instrument())
    row = result.records[0].features.to_row()
    assert row.shape == (len(FEATURE_COLUMNS),)
    assert row[FEATURE_COLUMNS.index("is_at_best")] in (0.0, 1.0)


def test_priority_volume_non_increasing_under_executions():
    from lobkit.book import BookState

    A, E, B, S = MessageKind.ADD, MessageKind.EXECUTE, Side.BID, Side.ASK
    book = BookState()
    book.apply(_msg(1, A, "b1", B, 100, size=5))
    book.apply(_msg(2, A, "b2", B, 100, size=3))
    book.apply(_msg(3, A, "mine", B, 99, size=2))
    history = [book.priority_volume("mine")]
    for seq, take in ((4, 2.0), (5, 3.0), (6, 3.0)):
        book.apply(_msg(seq, E, "b1" if seq < 6 else "b2", B, 100, exec_size=take))
        history.append(book.priority_volume("mine"))
    assert history == [8.0, 6.0, 3.0, 0.0]
    assert all(a >= b for a, b in zip(history, history[1:]))
