"""Fixed-horizon fill probability model trained on censored order outcomes.

Cancellation and feed loss censor the execution time, so the binary
cross-entropy is reweighted by the inverse of the estimated censoring
survival: orders executed before the horizon weigh ``1/G(E)``, orders that
stay alive through the horizon weigh ``1/G(T)``, and orders censored first
drop out of the loss.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .features import FEATURE_COLUMNS, FeatureVector
from .mlp import MLP, SingleClass, TrainConfig, TrainingReport, train_mlp
from .mlp import gradient_check, permutation_importance  # re-exported diagnostics
from .replay import OrderLifecycle, Outcome
from .survival import (
    CAUSE_CANCELLATION,
    CAUSE_CENSORED,
    CAUSE_EXECUTION,
    Observation,
    SurvivalCurve,
    kaplan_meier,
)

__all__ = [
    "censoring_survival",
    "CensoringModel",
    "stratified_censoring_survival",
    "ipcw_weights",
    "IPCWResult",
    "build_training_matrix",
    "FillModel",
    "train_fill_model",
    "predict_fill",
    "gradient_check",
    "permutation_importance",
]


def censoring_survival(obs: Sequence[Observation]) -> SurvivalCurve:
    """Product-limit curve of the censoring variable, with roles swapped:
    cancellation and feed loss die, execution censors.  Executions sharing a
    timestamp with a cancellation leave the risk set first, keeping the
    deaths-before-censorings rule consistent between the two curves."""
    return kaplan_meier(
        obs,
        death_causes=(CAUSE_CANCELLATION, CAUSE_CENSORED),
        tie_first_causes=(CAUSE_EXECUTION,),
    )


@dataclass
class CensoringModel:
    """Censoring survival stratified by placement regime.

    Passive orders stratify on distance buckets, at-best orders form one
    stratum, aggressive orders stratify on aggressiveness-index buckets.
    """

    delta_edges: list[float]
    omega_edges: list[float]
    curves: dict[str, SurvivalCurve] = field(default_factory=dict)

    def stratum_of(self, delta: float, omega: float | None) -> str:
        if delta == 0:
            return "at_best"
        if delta < 0:
            om = 0.0 if omega is None else omega
            idx = int(np.clip(np.searchsorted(self.omega_edges, om, side="right") - 1, 0, len(self.omega_edges) - 2))
            return f"aggressive_{idx}"
        idx = int(np.clip(np.searchsorted(self.delta_edges, delta, side="right") - 1, 0, len(self.delta_edges) - 2))
        return f"passive_{idx}"

    def survival_at(self, delta: float, omega: float | None, t: float) -> float:
        key = self.stratum_of(delta, omega)
        curve = self.curves.get(key)
        if curve is None:
            curve = self.curves.get("pooled")  # stratum unseen when fitting
        if curve is None:
            raise KeyError(f"no censoring curve for stratum {key!r} and no pooled fallback")
        return float(curve.at(t))


DEFAULT_OMEGA_EDGES = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0 + 1e-9]


def stratified_censoring_survival(
    records: Sequence[OrderLifecycle],
    delta_edges: Sequence[float] | None = None,
    omega_edges: Sequence[float] | None = None,
    min_count: int = 50,
) -> CensoringModel:
    """Per-regime censoring curves; passive deciles by default."""
    deltas = [r.features.delta for r in records if r.features.delta > 0]
    if delta_edges is None:
        if deltas:
            qs = np.quantile(deltas, np.linspace(0, 1, 11))
            delta_edges = sorted(set(float(q) for q in qs))
            delta_edges[-1] += 1e-9
            if len(delta_edges) < 2:
                delta_edges = [0.0, float("inf")]
        else:
            delta_edges = [0.0, float("inf")]
    model = CensoringModel(delta_edges=list(delta_edges), omega_edges=list(omega_edges or DEFAULT_OMEGA_EDGES))
    groups: dict[str, list[Observation]] = {}
    for rec in records:
        key = model.stratum_of(rec.features.delta, rec.features.aggressiveness)
        groups.setdefault(key, []).append(Observation(rec.outcome_time, int(rec.outcome)))
    pooled = [Observation(r.outcome_time, int(r.outcome)) for r in records]
    pooled_curve = censoring_survival(pooled)
    for key, obs in groups.items():
        # thin strata fall back to the pooled curve rather than a noisy one
        model.curves[key] = (
            censoring_survival(obs) if len(obs) >= min_count else pooled_curve
        )
    model.curves.setdefault("pooled", pooled_curve)
    return model


@dataclass
class IPCWResult:
    weights: np.ndarray
    labels: np.ndarray  # 1 when executed within the horizon
    floored: int  # censoring survival evaluations clipped at the floor


def ipcw_weights(
    records: Sequence[OrderLifecycle],
    horizon: float,
    censoring: SurvivalCurve | CensoringModel | None = None,
    floor: float = 0.01,
) -> IPCWResult:
    """Inverse-probability-of-censoring weights at a fixed horizon.

    Executed-within-horizon orders get ``1/G(E)``; orders observed alive
    through the horizon get ``1/G(T)``; orders cancelled or censored before
    ``min(E, T)`` get zero.  ``G`` is evaluated just before the event time,
    matching the deaths-before-censorings tie rule of the estimator.
    """
    if censoring is None:
        censoring = censoring_survival([Observation(r.outcome_time, int(r.outcome)) for r in records])
    weights = np.zeros(len(records))
    labels = np.zeros(len(records))
    floored = 0
    for i, rec in enumerate(records):
        executed_at = rec.outcome_time if rec.outcome is Outcome.FILLED else None
        if executed_at is not None and executed_at <= horizon:
            labels[i] = 1.0
            t_eval = executed_at
        elif rec.outcome_time > horizon or (executed_at is not None):
            # survived through the horizon (death or censoring came later)
            t_eval = horizon
        else:
            continue  # censored (cancel or feed loss) before min(E, T): weight 0
        if isinstance(censoring, CensoringModel):
            g = censoring.survival_at(rec.features.delta, rec.features.aggressiveness, t_eval)
        else:
            g = float(censoring.at(t_eval))
        if g < floor:
            g = floor
            floored += 1
        weights[i] = 1.0 / g
    return IPCWResult(weights=weights, labels=labels, floored=floored)


def build_training_matrix(
    records: Sequence[OrderLifecycle],
    horizon: float,
    censoring: SurvivalCurve | CensoringModel | None = None,
    drop_partial_windows: bool = True,
    floor: float = 0.01,
):
    """(X, y, w, kept_records, ipcw) ready for the classifier."""
    kept = [r for r in records if not (drop_partial_windows and r.partial_window)]
    ipcw = ipcw_weights(kept, horizon, censoring, floor=floor)
    X = np.array([r.features.to_row() for r in kept]) if kept else np.zeros((0, len(FEATURE_COLUMNS)))
    return X, ipcw.labels, ipcw.weights, kept, ipcw


# ---------------------------------------------------------------------------
# Model wrapper
# ---------------------------------------------------------------------------

HIDDEN_LAYERS = (32, 32, 32)


@dataclass
class FillModel:
    mlp: MLP
    columns: tuple[str, ...] = FEATURE_COLUMNS
    horizon: float = 1.0
    trained_span: tuple[int, int] | None = None  # (first_ts, last_ts) of training rows
    report: TrainingReport | None = None

    def predict(self, z: FeatureVector | np.ndarray) -> float | np.ndarray:
        row = z.to_row() if isinstance(z, FeatureVector) else np.asarray(z, dtype=float)
        out = self.mlp.predict(row)
        return float(out[0]) if row.ndim == 1 else out

    def save(self, path: str | Path) -> None:
        blob = {
            "kind": "fill",
            "columns": list(self.columns),
            "horizon": self.horizon,
            "trained_span": list(self.trained_span) if self.trained_span else None,
            "mlp": self.mlp.to_dict(),
        }
        Path(path).write_text(json.dumps(blob, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "FillModel":
        blob = json.loads(Path(path).read_text())
        return cls(
            mlp=MLP.from_dict(blob["mlp"]),
            columns=tuple(blob["columns"]),
            horizon=blob["horizon"],
            trained_span=tuple(blob["trained_span"]) if blob.get("trained_span") else None,
        )


def train_fill_model(
    X: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    cfg: TrainConfig,
    columns: Sequence[str] = FEATURE_COLUMNS,
    horizon: float = 1.0,
    trained_span: tuple[int, int] | None = None,
) -> FillModel:
    """Weighted binary cross-entropy fit of the sigmoid-head network."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    active = y[w > 0]
    if active.size == 0 or active.min() == active.max():
        raise SingleClass("training needs both classes among positive-weight samples")
    mlp = MLP([X.shape[1], *HIDDEN_LAYERS, 1], output="sigmoid", seed=cfg.seed)
    report = train_mlp(mlp, X, y, w, cfg)
    return FillModel(mlp=mlp, columns=tuple(columns), horizon=horizon, trained_span=trained_span, report=report)


def predict_fill(model: FillModel, z: FeatureVector | np.ndarray) -> float | np.ndarray:
    return model.predict(z)


@dataclass
class RegimeFillModels:
    """One classifier per placement regime, dispatched on the distance sign.

    Alternative to the pooled model with regime indicator columns; regimes
    lacking both classes fall back to the pooled model.
    """

    passive: FillModel
    at_best: FillModel
    aggressive: FillModel
    columns: tuple[str, ...] = FEATURE_COLUMNS
    horizon: float = 1.0

    def _pick(self, delta: float) -> FillModel:
        if delta > 0:
            return self.passive
        if delta == 0:
            return self.at_best
        return self.aggressive

    def predict(self, z: FeatureVector | np.ndarray) -> float | np.ndarray:
        if isinstance(z, FeatureVector):
            return self._pick(z.delta).predict(z)
        arr = np.asarray(z, dtype=float)
        single = arr.ndim == 1
        arr = np.atleast_2d(arr)
        delta = arr[:, self.columns.index("delta")]
        out = np.empty(len(arr))
        for selector, model in (
            (delta > 0, self.passive),
            (delta == 0, self.at_best),
            (delta < 0, self.aggressive),
        ):
            if np.any(selector):
                out[selector] = model.mlp.predict(arr[selector])
        return float(out[0]) if single else out

    def save(self, path: str | Path) -> None:
        blob = {
            "kind": "fill-per-regime",
            "columns": list(self.columns),
            "horizon": self.horizon,
            "passive": self.passive.mlp.to_dict(),
            "at_best": self.at_best.mlp.to_dict(),
            "aggressive": self.aggressive.mlp.to_dict(),
        }
        Path(path).write_text(json.dumps(blob, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "RegimeFillModels":
        blob = json.loads(Path(path).read_text())
        columns = tuple(blob["columns"])
        horizon = blob["horizon"]
        parts = {
            key: FillModel(mlp=MLP.from_dict(blob[key]), columns=columns, horizon=horizon)
            for key in ("passive", "at_best", "aggressive")
        }
        return cls(columns=columns, horizon=horizon, **parts)


def train_fill_model_per_regime(
    X: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    cfg: TrainConfig,
    columns: Sequence[str] = FEATURE_COLUMNS,
    horizon: float = 1.0,
) -> RegimeFillModels:
    """Separate passive / at-best / aggressive classifiers."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    pooled = train_fill_model(X, y, w, cfg, columns=columns, horizon=horizon)
    delta = X[:, list(columns).index("delta")]
    min_rows = max(64, cfg.batch // 4)
    parts: dict[str, FillModel] = {}
    for name, selector in (("passive", delta > 0), ("at_best", delta == 0), ("aggressive", delta < 0)):
        rows = np.flatnonzero(selector)
        active = y[rows][w[rows] > 0]
        if rows.size < min_rows or active.size == 0 or active.min() == active.max():
            parts[name] = pooled  # too thin or single-class: share the pooled fit
            continue
        parts[name] = train_fill_model(X[rows], y[rows], w[rows], cfg, columns=columns, horizon=horizon)
    return RegimeFillModels(columns=tuple(columns), horizon=horizon, **parts)
