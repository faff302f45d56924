import json

import pytest

from lobkit.cli import load_config, main, ConfigInvalid
from lobkit.features import FeatureVector
from lobkit.messages import read_messages, write_messages
from lobkit.synth import GroundTruthConfig, generate_flow


def test_config_file_and_overrides(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text(
        """
        # instrument
        tick_size = 0.01
        horizon = 2.0
        depth_value = 30
        fee_level = 8
        """
    )
    cfg = load_config(str(cfg_file), ["fee_level=9", "lr=0.01"])
    assert cfg.horizon == 2.0
    assert cfg.depth_value == 30
    assert cfg.fee_level == 9
    assert cfg.lr == 0.01


def test_config_rejects_unknown_keys(tmp_path):
    cfg_file = tmp_path / "bad.cfg"
    cfg_file.write_text("no_such_key = 4\n")
    with pytest.raises(ConfigInvalid):
        load_config(str(cfg_file), [])


def test_invalid_config_exits_nonzero(tmp_path, capsys):
    rc = main(["--set", "horizon=-1", "synth", "--seed", "1", "--duration", "5",
               "--out", str(tmp_path / "m.csv"), "--truth", str(tmp_path / "t.csv")])
    assert rc == 1
    err = capsys.readouterr().err
    payload = json.loads(err.strip().splitlines()[-1])
    assert payload["error"] == "ConfigInvalid"


def test_missing_input_reports_error(tmp_path, capsys):
    rc = main(["replay", "--messages", str(tmp_path / "absent.csv"), "--out", str(tmp_path / "o.csv")])
    assert rc == 1
    payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert payload["error"] == "InputMissing"


def test_message_round_trip_csv_and_ndjson(tmp_path):
    msgs, _ = generate_flow(GroundTruthConfig(seed=3), 5.0)
    for name in ("stream.csv", "stream.ndjson"):
        path = tmp_path / name
        write_messages(path, msgs)
        back = list(read_messages(path))
        assert back == msgs


def _run(args):
    rc = main(args)
    assert rc == 0, f"command failed: {args}"


def test_full_pipeline_through_cli(tmp_path):
    d = tmp_path
    base = ["--set", "trade_window=20", "--set", "min_bucket_count=10"]
    _run(base + [
        "synth", "--preset", "monotone-delta", "--seed", "5", "--duration", "120",
        "--out", str(d / "messages.csv"), "--truth", str(d / "truth.csv"),
    ])
    _run(base + [
        "replay", "--messages", str(d / "messages.csv"), "--out", str(d / "lifecycles.csv"),
        "--fill-ratio-out", str(d / "icdf.csv"), "--diagnostics-out", str(d / "diag.json"),
    ])
    diag = json.loads((d / "diag.json").read_text())
    assert diag["crossed_rejected"] == 0 and diag["unknown_rejected"] == 0
    _run(base + [
        "features", "--lifecycles", str(d / "lifecycles.csv"), "--truth", str(d / "truth.csv"),
        "--out", str(d / "matrix.csv"),
    ])
    _run(base + [
        "survival", "--lifecycles", str(d / "lifecycles.csv"), "--truth", str(d / "truth.csv"),
        "--out", str(d / "curves.csv"), "--by", "delta", "--edges", "0,1,2,3,6",
    ])
    curves = (d / "curves.csv").read_text().splitlines()
    assert curves[0].startswith("bucket_delta,cause,time,incidence")
    _run(base + [
        "survival", "--lifecycles", str(d / "lifecycles.csv"), "--mode", "post-and-wait",
        "--out", str(d / "pw.csv"),
    ])
    _run(base + [
        "survival", "--lifecycles", str(d / "lifecycles.csv"), "--truth", str(d / "truth.csv"),
        "--out", str(d / "grid2d.csv"), "--by", "delta", "--by", "spread",
        "--edges", "0,2,6", "--edges", "0,32",
    ])
    assert (d / "grid2d.csv").read_text().splitlines()[0].startswith("bucket_delta,bucket_spread")
    _run(base + [
        "train-fill", "--matrix", str(d / "matrix.csv"), "--seed", "7",
        "--out", str(d / "fill.json"), "--report", str(d / "fill_report.json"), "--importance",
    ])
    _run(base + [
        "train-fill", "--matrix", str(d / "matrix.csv"), "--seed", "7", "--per-regime",
        "--out", str(d / "fill_regimes.json"), "--report", str(d / "fill_regimes_report.json"),
    ])
    assert json.loads((d / "fill_regimes.json").read_text())["kind"] == "fill-per-regime"
    _run(base + [
        "train-cleanup", "--matrix", str(d / "matrix.csv"), "--seed", "7",
        "--out", str(d / "cleanup.json"), "--report", str(d / "cleanup_report.json"),
        "--bucket-curve-out", str(d / "vhat_by_vol.csv"),
    ])
    assert (d / "vhat_by_vol.csv").read_text().startswith("volatility_lo,volatility_hi")
    assert "permutation_importance" in json.loads((d / "fill_report.json").read_text())

    # route on a hand-written snapshot
    fv = FeatureVector(
        delta=1.0, spread=4.0, spread_after=4.0, best_imbalance=0.0, add_imbalance=0.0,
        aggressiveness=None, prior_volume=2.0, size=1.0, signed_flow=0.0, flow_imbalance=0.0,
        signed_traded=0.0, traded_imbalance=0.0, time_since_trade=0.1,
        median_trade_duration=0.1, volatility=1.0,
    )
    snapshot = {
        "best_bid": 500.00,
        "best_ask": 500.04,
        "tick_size": 0.01,
        "features": {k: getattr(fv, k) for k in fv.__dataclass_fields__},
    }
    (d / "snap.json").write_text(json.dumps(snapshot))
    _run(base + [
        "route", "--snapshot", str(d / "snap.json"), "--fill-model", str(d / "fill.json"),
        "--cleanup-model", str(d / "cleanup.json"), "--quantity", "1.0",
        "--out", str(d / "decision.json"), "--curve-out", str(d / "curve.csv"),
        "--decision-map-out", str(d / "map.csv"), "--surface-out", str(d / "surface.csv"),
        "--surface-spread-min", "2", "--surface-spread-max", "6",
    ])
    decision = json.loads((d / "decision.json").read_text())
    assert decision["action"] in ("limit", "market")
    surface = (d / "surface.csv").read_text().splitlines()
    assert surface[0] == "spread,delta,saved_cost,fill_probability,cleanup_ticks,is_optimum"
    assert len(surface) > 5

    # second period for the backtest
    _run(base + [
        "synth", "--preset", "monotone-delta", "--seed", "6", "--duration", "120",
        "--synth-set", "start_ts=1700000200000000000",  # disjoint later period
        "--out", str(d / "messages2.csv"), "--truth", str(d / "truth2.csv"),
    ])
    _run(base + [
        "replay", "--messages", str(d / "messages2.csv"), "--out", str(d / "lifecycles2.csv"),
    ])
    _run(base + [
        "backtest", "--lifecycles", str(d / "lifecycles2.csv"), "--truth", str(d / "truth2.csv"),
        "--train-matrix", str(d / "matrix.csv"), "--fill-model", str(d / "fill.json"),
        "--cleanup-model", str(d / "cleanup.json"), "--average-trade-size", "1.0",
        "--out", str(d / "metrics.json"), "--decisions-out", str(d / "decisions.csv"),
    ])
    metrics = json.loads((d / "metrics.json").read_text())
    assert set(metrics["metrics"]) == {"I", "II", "III"}
    for model_metrics in metrics["metrics"].values():
        for action in ("limit", "market"):
            m = model_metrics[action]
            if m["precision"] + m["recall"] > 0:
                expected_f = 2 * m["precision"] * m["recall"] / (m["precision"] + m["recall"])
                assert m["f_score"] == pytest.approx(expected_f)

    _run(base + ["report", "--dir", str(d), "--out", str(d / "report.html")])
    html = (d / "report.html").read_text()
    assert "metrics.json" in html and "<svg" in html
