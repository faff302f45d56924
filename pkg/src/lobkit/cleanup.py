"""Clean-up cost estimation: expected best-ask move at the horizon given
non-execution, as a bucketed curve and as a regression network.

Only orders observed alive through the horizon with a measurable ask move
qualify; everything else is excluded and counted by reason.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .features import FEATURE_COLUMNS, FeatureVector
from .mlp import MLP, TrainConfig, TrainingReport, train_mlp
from .replay import OrderLifecycle


@dataclass(slots=True)
class CleanupSample:
    features: FeatureVector
    target: float  # best-ask move over the horizon, ticks


@dataclass
class CollectionReport:
    kept: int = 0
    died_within_horizon: int = 0
    unmeasurable: int = 0
    partial_window: int = 0


def collect_cleanup_samples(
    records: Sequence[OrderLifecycle],
    horizon: float,
    drop_partial_windows: bool = True,
) -> tuple[list[CleanupSample], CollectionReport]:
    """Samples from orders whose lifetime exceeds the horizon."""
    samples: list[CleanupSample] = []
    report = CollectionReport()
    for rec in records:
        if rec.outcome_time <= horizon:
            report.died_within_horizon += 1
            continue
        if rec.dp_ask_horizon is None:
            report.unmeasurable += 1
            continue
        if drop_partial_windows and rec.partial_window:
            report.partial_window += 1
            continue
        samples.append(CleanupSample(rec.features, rec.dp_ask_horizon))
        report.kept += 1
    return samples, report


def constant_cleanup(samples: Sequence[CleanupSample]) -> float:
    """Unconditional mean ask move: the constant-V baseline."""
    if not samples:
        raise ValueError("no clean-up samples")
    return float(np.mean([s.target for s in samples]))


@dataclass
class BucketCurve:
    edges: np.ndarray
    means: np.ndarray
    std_errors: np.ndarray
    counts: np.ndarray
    omitted: dict[int, int]

    @property
    def mids(self) -> np.ndarray:
        return (self.edges[:-1] + self.edges[1:]) / 2.0


def bucket_estimate(
    values: Sequence[float],
    targets: Sequence[float],
    edges: Sequence[float],
    min_count: int = 30,
) -> BucketCurve:
    """Per-bucket conditional mean of the ask move with its standard error."""
    values = np.asarray(values, dtype=float)
    targets = np.asarray(targets, dtype=float)
    edges = np.asarray(edges, dtype=float)
    n_buckets = len(edges) - 1
    means = np.full(n_buckets, np.nan)
    ses = np.full(n_buckets, np.nan)
    counts = np.zeros(n_buckets, dtype=int)
    omitted: dict[int, int] = {}
    idx = np.searchsorted(edges, values, side="right") - 1
    for b in range(n_buckets):
        sel = idx == b
        counts[b] = int(sel.sum())
        if counts[b] < min_count:
            if counts[b] > 0:
                omitted[b] = counts[b]
            continue
        t = targets[sel]
        means[b] = t.mean()
        ses[b] = t.std(ddof=1) / np.sqrt(counts[b]) if counts[b] > 1 else 0.0
    return BucketCurve(edges=edges, means=means, std_errors=ses, counts=counts, omitted=omitted)


# ---------------------------------------------------------------------------
# Regression model
# ---------------------------------------------------------------------------

HIDDEN_LAYERS = (32, 32, 32)


@dataclass
class CleanupModel:
    mlp: MLP
    columns: tuple[str, ...] = FEATURE_COLUMNS
    horizon: float = 1.0
    winsor_bounds: tuple[float, float] | None = None
    trained_span: tuple[int, int] | None = None
    report: TrainingReport | None = None

    def predict(self, z: FeatureVector | np.ndarray) -> float | np.ndarray:
        row = z.to_row() if isinstance(z, FeatureVector) else np.asarray(z, dtype=float)
        out = self.mlp.predict(row)
        return float(out[0]) if row.ndim == 1 else out

    def save(self, path: str | Path) -> None:
        blob = {
            "kind": "cleanup",
            "columns": list(self.columns),
            "horizon": self.horizon,
            "winsor_bounds": list(self.winsor_bounds) if self.winsor_bounds else None,
            "trained_span": list(self.trained_span) if self.trained_span else None,
            "mlp": self.mlp.to_dict(),
        }
        Path(path).write_text(json.dumps(blob, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "CleanupModel":
        blob = json.loads(Path(path).read_text())
        return cls(
            mlp=MLP.from_dict(blob["mlp"]),
            columns=tuple(blob["columns"]),
            horizon=blob["horizon"],
            winsor_bounds=tuple(blob["winsor_bounds"]) if blob.get("winsor_bounds") else None,
            trained_span=tuple(blob["trained_span"]) if blob.get("trained_span") else None,
        )


def winsorize(targets: np.ndarray, quantiles: tuple[float, float] = (0.001, 0.999)) -> tuple[np.ndarray, tuple[float, float]]:
    lo, hi = np.quantile(targets, quantiles)
    return np.clip(targets, lo, hi), (float(lo), float(hi))


def train_cleanup_model(
    X: np.ndarray,
    targets: np.ndarray,
    cfg: TrainConfig,
    columns: Sequence[str] = FEATURE_COLUMNS,
    horizon: float = 1.0,
    winsor_quantiles: tuple[float, float] | None = (0.001, 0.999),
    trained_span: tuple[int, int] | None = None,
) -> CleanupModel:
    """Squared-loss fit of the identity-head network on winsorized targets."""
    X = np.asarray(X, dtype=float)
    targets = np.asarray(targets, dtype=float)
    bounds = None
    if winsor_quantiles is not None and len(targets) > 0:
        targets, bounds = winsorize(targets, winsor_quantiles)
    mlp = MLP([X.shape[1], *HIDDEN_LAYERS, 1], output="identity", seed=cfg.seed)
    report = train_mlp(mlp, X, targets, np.ones(len(targets)), cfg)
    return CleanupModel(
        mlp=mlp,
        columns=tuple(columns),
        horizon=horizon,
        winsor_bounds=bounds,
        trained_span=trained_span,
        report=report,
    )


def predict_cleanup(model: CleanupModel, z: FeatureVector | np.ndarray) -> float | np.ndarray:
    return model.predict(z)


def samples_to_matrix(samples: Sequence[CleanupSample]) -> tuple[np.ndarray, np.ndarray]:
    if not samples:
        return np.zeros((0, len(FEATURE_COLUMNS))), np.zeros(0)
    X = np.array([s.features.to_row() for s in samples])
    t = np.array([s.target for s in samples])
    return X, t
