"""CSV artifacts exchanged between the pipeline stages.

Floats are written with ``repr`` so identical runs produce byte-identical
files and values round-trip exactly.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

from .features import FEATURE_COLUMNS, FeatureVector
from .messages import Side
from .replay import OrderLifecycle, Outcome
from .survival import CIFCurve, SurvivalCurve

_FEATURE_FIELDS = (
    "delta",
    "spread",
    "spread_after",
    "best_imbalance",
    "add_imbalance",
    "aggressiveness",
    "prior_volume",
    "signed_flow",
    "flow_imbalance",
    "signed_traded",
    "traded_imbalance",
    "time_since_trade",
    "median_trade_duration",
    "volatility",
)

LIFECYCLE_FIELDS = (
    "order_id",
    "side",
    "insert_ts_ns",
    "price_ticks",
    "size",
    "outcome",
    "outcome_time_s",
    "fill_ratio",
    "fill_ratio_horizon",
    "dp_ask_horizon",
    "partial_window",
    "insert_best_ask",
) + _FEATURE_FIELDS


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_lifecycles(path: str | Path, records: Sequence[OrderLifecycle], horizon: float) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LIFECYCLE_FIELDS)
        for r in records:
            f = r.features
            writer.writerow(
                [
                    r.order_id,
                    r.side.value,
                    r.insert_ts,
                    r.price,
                    repr(float(r.size)),
                    r.outcome.name.lower(),
                    repr(float(r.outcome_time)),
                    repr(float(r.fill_ratio)),
                    repr(float(r.fill_ratio_within(horizon))),
                    _fmt(r.dp_ask_horizon),
                    int(f.partial_window),
                    r.insert_best_ask,
                ]
                + [_fmt(getattr(f, name)) for name in _FEATURE_FIELDS]
            )


def read_lifecycles(path: str | Path) -> list[OrderLifecycle]:
    records: list[OrderLifecycle] = []
    with Path(path).open(newline="") as fh:
        for rec in csv.DictReader(fh):
            features = FeatureVector(
                delta=float(rec["delta"]),
                spread=float(rec["spread"]),
                spread_after=float(rec["spread_after"]),
                best_imbalance=float(rec["best_imbalance"]),
                add_imbalance=float(rec["add_imbalance"]),
                aggressiveness=float(rec["aggressiveness"]) if rec["aggressiveness"] else None,
                prior_volume=float(rec["prior_volume"]),
                size=float(rec["size"]),
                signed_flow=float(rec["signed_flow"]),
                flow_imbalance=float(rec["flow_imbalance"]),
                signed_traded=float(rec["signed_traded"]),
                traded_imbalance=float(rec["traded_imbalance"]),
                time_since_trade=float(rec["time_since_trade"]),
                median_trade_duration=float(rec["median_trade_duration"]),
                volatility=float(rec["volatility"]),
                partial_window=bool(int(rec["partial_window"])),
            )
            records.append(
                OrderLifecycle(
                    order_id=rec["order_id"],
                    side=Side(rec["side"]),
                    insert_ts=int(rec["insert_ts_ns"]),
                    price=int(rec["price_ticks"]),
                    size=float(rec["size"]),
                    features=features,
                    outcome=Outcome[rec["outcome"].upper()],
                    outcome_time=float(rec["outcome_time_s"]),
                    fill_ratio=float(rec["fill_ratio"]),
                    fill_ratio_horizon=float(rec["fill_ratio_horizon"]) if rec["fill_ratio_horizon"] else None,
                    dp_ask_horizon=float(rec["dp_ask_horizon"]) if rec["dp_ask_horizon"] else None,
                    insert_best_ask=int(rec["insert_best_ask"]),
                )
            )
    return records


MATRIX_FIELDS = (
    "order_id",
    "insert_ts_ns",
    "outcome",
    "outcome_time_s",
    "label",
    "weight",
    "dp_ask_horizon",
    "partial_window",
) + FEATURE_COLUMNS


def write_matrix(
    path: str | Path,
    records: Sequence[OrderLifecycle],
    labels: np.ndarray,
    weights: np.ndarray,
) -> None:
    """Feature matrix export: one row per lifecycle with label and weight."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MATRIX_FIELDS)
        for r, y, w in zip(records, labels, weights):
            row = [
                r.order_id,
                r.insert_ts,
                r.outcome.name.lower(),
                repr(float(r.outcome_time)),
                repr(float(y)),
                repr(float(w)),
                _fmt(r.dp_ask_horizon),
                int(r.features.partial_window),
            ]
            row.extend(repr(float(v)) for v in r.features.to_row())
            writer.writerow(row)


def read_matrix(path: str | Path):
    """(X, y, w, meta) from a feature matrix CSV; meta is a list of dicts."""
    rows_x: list[list[float]] = []
    ys: list[float] = []
    ws: list[float] = []
    meta: list[dict] = []
    with Path(path).open(newline="") as fh:
        for rec in csv.DictReader(fh):
            rows_x.append([float(rec[c]) for c in FEATURE_COLUMNS])
            ys.append(float(rec["label"]))
            ws.append(float(rec["weight"]))
            meta.append(
                {
                    "order_id": rec["order_id"],
                    "insert_ts": int(rec["insert_ts_ns"]),
                    "outcome": rec["outcome"],
                    "outcome_time": float(rec["outcome_time_s"]),
                    "dp_ask_horizon": float(rec["dp_ask_horizon"]) if rec["dp_ask_horizon"] else None,
                    "partial_window": bool(int(rec["partial_window"])),
                }
            )
    X = np.asarray(rows_x, dtype=float) if rows_x else np.zeros((0, len(FEATURE_COLUMNS)))
    return X, np.asarray(ys), np.asarray(ws), meta


def write_survival_curve(path: str | Path, curve: SurvivalCurve) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("time", "survival", "at_risk", "deaths", "censored"))
        for i in range(len(curve.times)):
            writer.writerow(
                [
                    repr(float(curve.times[i])),
                    repr(float(curve.values[i])),
                    repr(float(curve.at_risk[i])),
                    repr(float(curve.deaths[i])),
                    repr(float(curve.censored[i])),
                ]
            )


def write_cif_curves(path: str | Path, curves: dict[tuple, CIFCurve], by_names: Sequence[str], alpha: float = 0.05) -> None:
    """Long-format export of bucketed incidence curves with CI bands."""
    from .survival import CAUSE_CANCELLATION, CAUSE_EXECUTION, gray_variance, log_log_ci

    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        bucket_cols = [f"bucket_{name}" for name in by_names]
        writer.writerow(bucket_cols + ["cause", "time", "incidence", "variance", "ci_lo", "ci_hi"])
        for key in sorted(curves):
            curve = curves[key]
            for cause, name in ((CAUSE_EXECUTION, "execution"), (CAUSE_CANCELLATION, "cancellation")):
                var = gray_variance(curve, cause)
                for i in range(len(curve.times)):
                    f = float(curve.cif[cause][i])
                    lo, hi = log_log_ci(f, float(var[i]), alpha)
                    writer.writerow(
                        list(key)
                        + [
                            name,
                            repr(float(curve.times[i])),
                            repr(f),
                            repr(float(var[i])),
                            repr(lo),
                            repr(hi),
                        ]
                    )
