"""Reconstruct a book from a level-3 stream and inspect order lifecycles.

Generates a synthetic message log with known hazards, replays it through the
matching engine, and prints lifecycle outcomes plus the fill-ratio
diagnostic curve.
"""

from collections import Counter

from lobkit import GroundTruthConfig, InstrumentConfig, fill_ratio_icdf, generate_flow, track_lifecycles
from lobkit.synth import RegimeSpec

config = GroundTruthConfig(
    seed=7,
    regimes=[RegimeSpec(duration=120.0, exec_base=1.0, cancel_base=1.8, move_rate=3.0, trade_rate=5.0)],
    subject_rate=8.0,
    censor_rate=0.03,
)
messages, truth = generate_flow(config, 120.0)
print(f"generated {len(messages)} messages carrying {len(truth)} tracked subject orders")

instrument = InstrumentConfig(tick_size=0.01, horizon=1.0, depth_mode="bps", depth_value=30.0)
result = track_lifecycles(messages, instrument)
diag = result.diagnostics

print(f"replayed {diag.messages} messages: {len(result.records)} lifecycles, "
      f"{diag.gaps} feed gaps, {diag.trade_count} trades (avg size {diag.average_trade_size:.2f})")
print("validity:", "clean" if diag.crossed_rejected == diag.unknown_rejected == 0 else "flagged")

outcomes = Counter(r.outcome.name.lower() for r in result.records)
print("outcomes:", dict(outcomes))

subject_ids = {t.order_id for t in truth}
subjects = [r for r in result.records if r.order_id in subject_ids]
example = subjects[0]
print(f"\nexample lifecycle {example.order_id}: side={example.side.value} "
      f"delta={example.features.delta:+.0f} spread={example.features.spread:.0f} "
      f"-> {example.outcome.name.lower()} after {example.outcome_time:.3f}s "
      f"(fill ratio {example.fill_ratio:.2f})")

icdf = fill_ratio_icdf(result.records, horizon=1.0)
print("\nfill-ratio inverse CDF P(R > x) within the 1 s horizon:")
for x in (0.0, 0.25, 0.5, 0.75, 0.99):
    print(f"  P(R > {x:4.2f}) = {icdf.at(x):.4f}")
