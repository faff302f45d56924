"""Command-line pipelines over the library.

Every subcommand reads and writes the documented CSV/JSON artifacts and is
deterministic given the config and seed.  Failures print a machine-readable
JSON error to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io as lio
from . import synth as lsynth
from .backtest import (
    MODEL_I,
    MODEL_II,
    MODEL_III,
    EligibilityConfig,
    RouterModels,
    run_backtest,
    select_eligible,
)
from .cleanup import CleanupModel, train_cleanup_model
from .features import FEATURE_COLUMNS, FeatureVector
from .fill_model import (
    FillModel,
    build_training_matrix,
    stratified_censoring_survival,
    train_fill_model,
    train_fill_model_per_regime,
)
from .messages import InstrumentConfig, read_messages, write_messages
from .mlp import TrainConfig, permutation_importance
from .placement import (
    FEE_TABLE,
    FeePolicy,
    MarketSnapshot,
    decision_map,
    distance_spread_surface,
    fit_toy_model,
    optimal_distance,
)
from .replay import fill_ratio_icdf, track_lifecycles
from .report import write_report
from .survival import (
    CAUSE_EXECUTION,
    Observation,
    aalen_johansen,
    conditional_curves,
    fill_probability_at,
    observations_from_records,
    post_and_wait_fill,
)


class ConfigInvalid(ValueError):
    pass


class InputMissing(FileNotFoundError):
    pass


@dataclass
class PipelineConfig:
    tick_size: float = 0.01
    horizon: float = 1.0
    depth_mode: str = "bps"
    depth_value: float = 20.0
    event_window: int = 50
    trade_window: int = 50
    fee_level: int = 9
    lr: float = 1e-3
    batch: int = 512
    epochs: int = 100
    patience: int = 5
    val_fraction: float = 0.2
    ipcw_floor: float = 0.01
    min_bucket_count: int = 200
    max_size_ats_multiple: float = 5.0
    max_distance: float = float("inf")

    def instrument(self) -> InstrumentConfig:
        return InstrumentConfig(
            tick_size=self.tick_size,
            horizon=self.horizon,
            depth_mode=self.depth_mode,
            depth_value=self.depth_value,
            event_window=self.event_window,
            trade_window=self.trade_window,
        )

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            lr=self.lr,
            batch=self.batch,
            epochs=self.epochs,
            seed=seed,
            patience=self.patience,
            val_fraction=self.val_fraction,
        )


def load_config(path: str | None, overrides: Sequence[str]) -> PipelineConfig:
    """Plain ``key = value`` file, then ``--set key=value`` overrides."""
    values: dict[str, str] = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise InputMissing(f"config file {path} does not exist")
        for line_no, line in enumerate(p.read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigInvalid(f"{path}:{line_no}: expected key = value")
            key, _, raw = line.partition("=")
            values[key.strip()] = raw.strip()
    for item in overrides:
        if "=" not in item:
            raise ConfigInvalid(f"--set {item!r}: expected key=value")
        key, _, raw = item.partition("=")
        values[key.strip()] = raw.strip()
    cfg = PipelineConfig()
    for key, raw in values.items():
        if not hasattr(cfg, key):
            raise ConfigInvalid(f"unknown config key {key!r}")
        current = getattr(cfg, key)
        try:
            if isinstance(current, bool):
                setattr(cfg, key, raw.lower() in ("1", "true", "yes"))
            elif isinstance(current, int):
                setattr(cfg, key, int(raw))
            elif isinstance(current, float):
                setattr(cfg, key, float(raw))
            else:
                setattr(cfg, key, raw)
        except ValueError as exc:
            raise ConfigInvalid(f"config key {key!r}: {exc}") from exc
    if cfg.horizon <= 0:
        raise ConfigInvalid("horizon must be positive")
    if cfg.fee_level not in FEE_TABLE and cfg.fee_level != 0:
        raise ConfigInvalid(f"fee_level must be 0 (no fees) or 1..9, got {cfg.fee_level}")
    return cfg


def _fees(cfg: PipelineConfig) -> FeePolicy:
    from .placement import ZERO_FEES

    return ZERO_FEES if cfg.fee_level == 0 else FEE_TABLE[cfg.fee_level]


def _require(path: str, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise InputMissing(f"{what} {path} does not exist")
    return p


def _write_json(path: str | None, payload: dict) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2)
    if path is None:
        print(text)
    else:
        Path(path).write_text(text + "\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_synth(args, cfg: PipelineConfig) -> int:
    config = lsynth_preset(args.preset, args.seed, cfg)
    for item in args.synth_set or []:
        key, _, raw = item.partition("=")
        key = key.strip()
        if not hasattr(config, key):
            raise ConfigInvalid(f"unknown synth key {key!r}")
        current = getattr(config, key)
        if isinstance(current, (tuple, list)) or dataclasses.is_dataclass(current):
            raise ConfigInvalid(f"synth key {key!r} is not overridable from the command line")
        setattr(config, key, type(current)(raw))
    messages, truth = lsynth.generate_flow(config, args.duration)
    write_messages(args.out, messages)
    lsynth.write_truth(args.truth, truth)
    _write_json(None, {"messages": len(messages), "subjects": len(truth)})
    return 0


def lsynth_preset(name: str, seed: int, cfg: PipelineConfig) -> lsynth.GroundTruthConfig:
    presets = {
        "baseline": lambda: lsynth.GroundTruthConfig(seed=seed, horizon=cfg.horizon),
        "monotone-delta": lambda: lsynth.GroundTruthConfig(
            seed=seed,
            horizon=cfg.horizon,
            regimes=[lsynth.RegimeSpec(duration=3600.0, exec_base=1.4, cancel_base=1.2)],
            exec_delta_mult=lsynth.PiecewiseMultiplier(
                (-np.inf, 1, 2, 3, 4, np.inf), (2.4, 1.6, 1.0, 0.6, 0.35)
            ),
        ),
        "driftless": lambda: lsynth.GroundTruthConfig(
            seed=seed,
            horizon=cfg.horizon,
            regimes=[lsynth.RegimeSpec(duration=3600.0, exec_base=0.25, cancel_base=0.5, move_rate=3.0, up_probability=0.5)],
            delta_choices=(1, 2, 3, 4, 5, 6),
        ),
        "drift-up": lambda: lsynth.GroundTruthConfig(
            seed=seed,
            horizon=cfg.horizon,
            regimes=[lsynth.RegimeSpec(duration=3600.0, exec_base=0.25, cancel_base=0.5, move_rate=4.0, up_probability=0.75)],
            delta_choices=(1, 2, 3, 4, 5, 6),
        ),
    }
    if name not in presets:
        raise ConfigInvalid(f"unknown synth preset {name!r}; choose from {sorted(presets)}")
    return presets[name]()


def cmd_replay(args, cfg: PipelineConfig) -> int:
    _require(args.messages, "message log")
    result = track_lifecycles(read_messages(args.messages), cfg.instrument())
    lio.write_lifecycles(args.out, result.records, cfg.horizon)
    if args.fill_ratio_out:
        icdf = fill_ratio_icdf(result.records, cfg.horizon)
        xs, vals = icdf.support()
        import csv as _csv

        with Path(args.fill_ratio_out).open("w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(("ratio", "prob_exceed"))
            for x, v in zip(xs, vals):
                writer.writerow([repr(float(x)), repr(float(v))])
    d = result.diagnostics
    _write_json(
        args.diagnostics_out,
        {
            "messages": d.messages,
            "records": len(result.records),
            "gaps": d.gaps,
            "crossed_rejected": d.crossed_rejected,
            "unknown_rejected": d.unknown_rejected,
            "invalid_rejected": d.invalid_rejected,
            "marketable_excluded": d.marketable_excluded,
            "depth_excluded": d.depth_excluded,
            "average_trade_size": d.average_trade_size,
            "trade_count": d.trade_count,
        },
    )
    return 0


def _load_records(args, cfg: PipelineConfig):
    _require(args.lifecycles, "lifecycle file")
    records = lio.read_lifecycles(args.lifecycles)
    if getattr(args, "truth", None):
        truth_ids = {t.order_id for t in lsynth.read_truth(_require(args.truth, "truth sidecar"))}
        records = [r for r in records if r.order_id in truth_ids]
    return records


def cmd_features(args, cfg: PipelineConfig) -> int:
    records = _load_records(args, cfg)
    if args.stratified:
        censoring = stratified_censoring_survival(records)
    else:
        censoring = None
    X, y, w, kept, ipcw = build_training_matrix(
        records,
        cfg.horizon,
        censoring,
        drop_partial_windows=not args.keep_partial,
        floor=cfg.ipcw_floor,
    )
    lio.write_matrix(args.out, kept, y, w)
    _write_json(None, {"rows": len(kept), "dropped_partial": len(records) - len(kept), "weight_floored": ipcw.floored})
    return 0


def cmd_survival(args, cfg: PipelineConfig) -> int:
    records = _load_records(args, cfg)
    obs = observations_from_records(records)
    if args.mode == "post-and-wait":
        curve = post_and_wait_fill(obs)
        lio.write_survival_curve(args.out, curve)
        _write_json(None, {"fill_probability_at_horizon": fill_probability_at(curve, cfg.horizon)})
        return 0
    if not args.by:
        curve = aalen_johansen(obs)
        lio.write_cif_curves(args.out, {(): curve}, [])
        _write_json(None, {"fill_cif_at_horizon": curve.incidence_at(CAUSE_EXECUTION, cfg.horizon)})
        return 0
    by = []
    edges_list = args.edges or []
    for i, name in enumerate(args.by):
        if name not in FEATURE_COLUMNS:
            raise ConfigInvalid(f"unknown feature {name!r}")
        if i < len(edges_list):
            edges = [float(x) for x in edges_list[i].split(",")]
        else:
            values = [getattr(r.features, name) for r in records]
            qs = np.quantile(values, np.linspace(0, 1, 6))
            edges = sorted(set(float(q) for q in qs))
            edges[-1] += 1e-9
        by.append((name, edges))
    curves, report = conditional_curves(records, by, min_count=cfg.min_bucket_count)
    lio.write_cif_curves(args.out, curves, [name for name, _ in by])
    _write_json(
        None,
        {
            "buckets_kept": {"/".join(map(str, k)): v for k, v in report.kept.items()},
            "buckets_omitted": {"/".join(map(str, k)): v for k, v in report.omitted.items()},
        },
    )
    return 0


def cmd_train_fill(args, cfg: PipelineConfig) -> int:
    X, y, w, meta = lio.read_matrix(_require(args.matrix, "feature matrix"))
    span = (min(m["insert_ts"] for m in meta), max(m["insert_ts"] for m in meta)) if meta else None
    if args.per_regime:
        regime_models = train_fill_model_per_regime(X, y, w, cfg.train_config(args.seed), horizon=cfg.horizon)
        regime_models.save(args.out)
        _write_json(args.report, {"per_regime": True})
        return 0
    model = train_fill_model(
        X, y, w, cfg.train_config(args.seed), horizon=cfg.horizon, trained_span=span
    )
    model.save(args.out)
    report: dict = {
        "train_loss": model.report.train_loss,
        "val_loss": model.report.val_loss,
        "best_epoch": model.report.best_epoch,
        "stopped_early": model.report.stopped_early,
    }
    if args.importance:
        n_val = max(1, int(round(len(X) * cfg.val_fraction)))
        scores = permutation_importance(
            model.mlp, X[-n_val:], y[-n_val:], w[-n_val:], columns=FEATURE_COLUMNS, seed=args.seed
        )
        report["permutation_importance"] = [[name, float(s)] for name, s in scores]
    _write_json(args.report, report)
    return 0


def cmd_train_cleanup(args, cfg: PipelineConfig) -> int:
    X, y, w, meta = lio.read_matrix(_require(args.matrix, "feature matrix"))
    rows = [
        i
        for i, m in enumerate(meta)
        if m["outcome_time"] > cfg.horizon and m["dp_ask_horizon"] is not None
    ]
    if not rows:
        raise ConfigInvalid("no qualifying clean-up rows in the matrix")
    Xc = X[rows]
    targets = np.array([meta[i]["dp_ask_horizon"] for i in rows])
    span = (min(meta[i]["insert_ts"] for i in rows), max(meta[i]["insert_ts"] for i in rows))
    model = train_cleanup_model(
        Xc, targets, cfg.train_config(args.seed), horizon=cfg.horizon, trained_span=span
    )
    model.save(args.out)
    if args.bucket_curve_out:
        from .cleanup import bucket_estimate

        feature_idx = FEATURE_COLUMNS.index(args.bucket_feature)
        values = Xc[:, feature_idx]
        qs = np.quantile(values, np.linspace(0, 1, 7))
        edges = sorted(set(float(q) for q in qs))
        edges[-1] += 1e-9
        curve = bucket_estimate(values, targets, edges, min_count=max(10, cfg.min_bucket_count // 10))
        import csv as _csv

        with Path(args.bucket_curve_out).open("w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow((args.bucket_feature + "_lo", args.bucket_feature + "_hi", "mid", "mean_ticks", "std_error", "count"))
            for b in range(len(curve.means)):
                if np.isnan(curve.means[b]):
                    continue
                writer.writerow(
                    [
                        repr(float(curve.edges[b])),
                        repr(float(curve.edges[b + 1])),
                        repr(float(curve.mids[b])),
                        repr(float(curve.means[b])),
                        repr(float(curve.std_errors[b])),
                        int(curve.counts[b]),
                    ]
                )
    _write_json(
        args.report,
        {
            "rows": len(rows),
            "constant_baseline": float(np.mean(targets)),
            "winsor_bounds": list(model.winsor_bounds) if model.winsor_bounds else None,
            "train_loss": model.report.train_loss,
            "val_loss": model.report.val_loss,
            "best_epoch": model.report.best_epoch,
        },
    )
    return 0


def _snapshot_from_json(path: str) -> MarketSnapshot:
    blob = json.loads(_require(path, "snapshot").read_text())
    feats = blob.get("features")
    fv = FeatureVector(**feats) if feats else None
    return MarketSnapshot(
        best_bid=float(blob["best_bid"]),
        best_ask=float(blob["best_ask"]),
        tick_size=float(blob["tick_size"]),
        features=fv,
    )


def cmd_route(args, cfg: PipelineConfig) -> int:
    snapshot = _snapshot_from_json(args.snapshot)
    fill = FillModel.load(_require(args.fill_model, "fill model"))
    cleanup = CleanupModel.load(_require(args.cleanup_model, "clean-up model"))
    if args.delta_min is not None and args.delta_max is not None:
        delta_range = (args.delta_min, args.delta_max)
    else:
        # sweep every admissible distance down to the depth filter's edge
        if cfg.depth_mode == "bps":
            mid_ticks = snapshot.mid / snapshot.tick_size
            bid_ticks = snapshot.best_bid / snapshot.tick_size
            delta_max = int(bid_ticks - mid_ticks * (1.0 - cfg.depth_value / 1e4))
        else:
            delta_max = int(cfg.depth_value)
        delta_range = (-snapshot.spread_ticks + 1, max(1, delta_max))
    decision = optimal_distance(snapshot, args.quantity, _fees(cfg), fill, cleanup, delta_range)
    _write_json(
        args.out,
        {
            "action": decision.action,
            "distance": decision.distance,
            "saved_cost": decision.saved_cost,
            "break_even_fill": decision.break_even_fill,
        },
    )
    if args.curve_out:
        import csv as _csv

        with Path(args.curve_out).open("w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(("delta", "fill_probability", "cleanup_ticks", "saved_cost"))
            for row in decision.curve:
                writer.writerow(
                    [
                        row["delta"],
                        repr(row["fill_probability"]),
                        repr(row["cleanup_ticks"]),
                        repr(row["saved_cost"]),
                    ]
                )
    if args.decision_map_out:
        cells = decision_map(snapshot, args.map_cleanup_ticks, np.linspace(0.0, 1.0, 101))
        import csv as _csv

        with Path(args.decision_map_out).open("w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(("level", "fill_probability", "saved_cost", "action", "break_even"))
            for cell in cells:
                writer.writerow(
                    [
                        cell["level"],
                        repr(cell["fill_probability"]),
                        repr(cell["saved_cost"]),
                        cell["action"],
                        repr(cell["break_even"]) if cell["break_even"] is not None else "",
                    ]
                )
    if args.surface_out:
        spreads = range(args.surface_spread_min, args.surface_spread_max + 1)
        rows = distance_spread_surface(snapshot, args.quantity, _fees(cfg), fill, cleanup, spreads)
        import csv as _csv

        with Path(args.surface_out).open("w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(("spread", "delta", "saved_cost", "fill_probability", "cleanup_ticks", "is_optimum"))
            for row in rows:
                writer.writerow(
                    [
                        row["spread"],
                        row["delta"],
                        repr(row["saved_cost"]),
                        repr(row["fill_probability"]),
                        repr(row["cleanup_ticks"]),
                        int(row["is_optimum"]),
                    ]
                )
    return 0


def cmd_backtest(args, cfg: PipelineConfig) -> int:
    records = _load_records(args, cfg)
    Xtr, ytr, wtr, meta_tr = lio.read_matrix(_require(args.train_matrix, "training matrix"))
    fill = FillModel.load(_require(args.fill_model, "fill model"))
    cleanup = CleanupModel.load(_require(args.cleanup_model, "clean-up model"))

    # model I components from the training matrix
    delta_idx = FEATURE_COLUMNS.index("delta")
    spread_idx = FEATURE_COLUMNS.index("spread")
    ask_distance = Xtr[:, delta_idx] + Xtr[:, spread_idx]
    obs_by_bucket: dict[int, list[Observation]] = {}
    for d, m in zip(ask_distance, meta_tr):
        cause = {"filled": 1, "cancelled": 2, "censored": 0}[m["outcome"]]
        obs_by_bucket.setdefault(int(round(d)), []).append(Observation(m["outcome_time"], cause))
    distances, probs = [], []
    for d in sorted(obs_by_bucket):
        bucket = obs_by_bucket[d]
        if len(bucket) < 30:
            continue
        distances.append(d)
        probs.append(fill_probability_at(post_and_wait_fill(bucket), cfg.horizon))
    cleanup_targets = [
        m["dp_ask_horizon"]
        for m in meta_tr
        if m["outcome_time"] > cfg.horizon and m["dp_ask_horizon"] is not None
    ]
    constant_v = float(np.mean(cleanup_targets)) if cleanup_targets else 0.0
    toy, flat = fit_toy_model(distances, probs, constant_v)
    span = (min(m["insert_ts"] for m in meta_tr), max(m["insert_ts"] for m in meta_tr))
    models = RouterModels(
        toy=toy, fill=fill, cleanup=cleanup, constant_cleanup=constant_v, trained_span=span
    )

    # eligibility needs the stream's average trade size
    ats = args.average_trade_size
    eligible = select_eligible(
        records,
        cfg.horizon,
        ats,
        EligibilityConfig(max_size_ats_multiple=cfg.max_size_ats_multiple, max_distance=cfg.max_distance),
    )
    report = run_backtest(
        eligible,
        [MODEL_I, MODEL_II, MODEL_III],
        models,
        _fees(cfg),
        cfg.horizon,
        cfg.tick_size,
    )
    payload = {
        "evaluated": report.evaluated,
        "excluded_ties": report.excluded_ties,
        "toy_flat_fit": flat,
        "constant_cleanup_ticks": constant_v,
        "metrics": {
            mid: {
                action: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f_score": m.f_score,
                    "tp": m.true_positive,
                    "fp": m.false_positive,
                    "fn": m.false_negative,
                }
                for action, m in actions.items()
            }
            for mid, actions in report.per_model.items()
        },
    }
    _write_json(args.out, payload)
    if args.decisions_out:
        import csv as _csv

        with Path(args.decisions_out).open("w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(("label", "decision_I", "decision_II", "decision_III"))
            for i, label in enumerate(report.labels):
                writer.writerow(
                    [label, report.decisions["I"][i], report.decisions["II"][i], report.decisions["III"][i]]
                )
    return 0


def cmd_report(args, cfg: PipelineConfig) -> int:
    write_report(Path(args.dir), Path(args.out))
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lobkit", description=__doc__)
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--set", dest="overrides", action="append", default=[], help="override config keys")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic stream with ground truth")
    p.add_argument("--preset", default="baseline")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--duration", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--synth-set", action="append", help="override scalar generator fields")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("replay", help="reconstruct the book and emit lifecycles")
    p.add_argument("--messages", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fill-ratio-out")
    p.add_argument("--diagnostics-out")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("features", help="label lifecycles and attach IPC weights")
    p.add_argument("--lifecycles", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", help="restrict to subject orders from a truth sidecar")
    p.add_argument("--keep-partial", action="store_true")
    p.add_argument("--stratified", action="store_true", default=True)
    p.add_argument("--no-stratified", dest="stratified", action="store_false")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("survival", help="estimate survival / incidence curves")
    p.add_argument("--lifecycles", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("competing", "post-and-wait"), default="competing")
    p.add_argument("--by", action="append", help="bucket feature (repeat for 2-D)")
    p.add_argument("--edges", action="append", help="comma-separated edges per --by")
    p.add_argument("--truth")
    p.set_defaults(func=cmd_survival)

    p = sub.add_parser("train-fill", help="train the fill probability classifier")
    p.add_argument("--matrix", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.add_argument("--importance", action="store_true")
    p.add_argument("--per-regime", action="store_true")
    p.set_defaults(func=cmd_train_fill)

    p = sub.add_parser("train-cleanup", help="train the clean-up cost regressor")
    p.add_argument("--matrix", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.add_argument("--bucket-curve-out")
    p.add_argument("--bucket-feature", default="volatility")
    p.set_defaults(func=cmd_train_cleanup)

    p = sub.add_parser("route", help="choose limit distance or market order")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--fill-model", required=True)
    p.add_argument("--cleanup-model", required=True)
    p.add_argument("--quantity", type=float, required=True)
    p.add_argument("--out")
    p.add_argument("--curve-out")
    p.add_argument("--delta-min", type=int)
    p.add_argument("--delta-max", type=int)
    p.add_argument("--decision-map-out")
    p.add_argument("--map-cleanup-ticks", type=float, default=200.0)
    p.add_argument("--surface-out")
    p.add_argument("--surface-spread-min", type=int, default=2)
    p.add_argument("--surface-spread-max", type=int, default=12)
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("backtest", help="score router decisions against labels")
    p.add_argument("--lifecycles", required=True)
    p.add_argument("--train-matrix", required=True)
    p.add_argument("--fill-model", required=True)
    p.add_argument("--cleanup-model", required=True)
    p.add_argument("--average-trade-size", type=float, required=True)
    p.add_argument("--truth")
    p.add_argument("--out")
    p.add_argument("--decisions-out")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("report", help="bundle artifacts into a single HTML page")
    p.add_argument("--dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        return args.func(args, cfg)
    except Exception as exc:  # surface every failure as machine-readable JSON
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
