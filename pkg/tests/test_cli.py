"""Command-line runner checks: configs, manifests, artifacts, report merge."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from aegislab.cli import config_hash, load_config, main


def write_config(path: Path, **fields) -> Path:
    path.write_text(json.dumps(fields))
    return path


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_corpus")
    assert main(["synth", "--config", str(write_config(
        out / "synth.json", corpus={"n_train": 600, "n_test": 300},
        out=str(out / "synth_run")))]) == 0
    return {"train": out / "synth_run" / "train.csv",
            "test": out / "synth_run" / "test.csv"}


def base_config(corpus, **extra) -> dict:
    cfg = {
        "data": {"train": str(corpus["train"]), "test": str(corpus["test"])},
        "train": {"n_trees": 10},
        "importance": {"repeats": 3},
    }
    cfg.update(extra)
    return cfg


def read_manifest(out: Path) -> dict:
    return json.loads((out / "manifest.json").read_text())


class TestConfigHandling:
    def test_defaults_apply_without_a_file(self):
        cfg = load_config(None, "train", None, None)
        assert cfg["experiment"] == "train"
        assert cfg["train"]["kind"] == "random_forest"
        assert cfg["split"]["seed"] == cfg["seed"] == 0

    def test_top_seed_flows_into_null_sub_seeds(self):
        cfg = load_config(None, "train", 9, None)
        assert cfg["seed"] == 9
        assert cfg["split"]["seed"] == 9
        assert cfg["train"]["seed"] == 9
        assert cfg["leakage"]["seed"] == 9

    def test_explicit_sub_seed_is_kept(self, tmp_path):
        path = write_config(tmp_path / "c.json", split={"seed": 4})
        cfg = load_config(path, "train", 9, None)
        assert cfg["split"]["seed"] == 4 and cfg["train"]["seed"] == 9

    def test_unknown_keys_are_rejected_with_their_path(self, tmp_path):
        path = write_config(tmp_path / "c.json", train={"depth": 3})
        from aegislab.errors import ConfigError
        with pytest.raises(ConfigError, match="train.depth"):
            load_config(path, "train", None, None)

    def test_experiment_mismatch_rejected(self, tmp_path):
        path = write_config(tmp_path / "c.json", experiment="train")
        from aegislab.errors import ConfigError
        with pytest.raises(ConfigError, match="experiment"):
            load_config(path, "mimicry", None, None)

    def test_hash_ignores_seed_and_output_location(self, tmp_path):
        a = load_config(write_config(tmp_path / "a.json", seed=0,
                                     out="runs/a"), "train", None, None)
        b = load_config(write_config(tmp_path / "b.json", seed=7,
                                     out="runs/b"), "train", None, None)
        c = load_config(write_config(tmp_path / "c.json",
                                     train={"n_trees": 5}), "train", None, None)
        assert config_hash(a) == config_hash(b)
        assert config_hash(a) != config_hash(c)

    def test_invalid_clip_reference_is_a_config_error(self, tmp_path):
        path = write_config(tmp_path / "c.json", mimicry_reference="test")
        assert main(["mimicry", "--config", str(path)]) == 2

    def test_malformed_json_is_a_config_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        assert main(["train", "--config", str(bad)]) == 2


@pytest.fixture(scope="module")
def intrusion_run(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("intrusion")
    cfg = write_config(out / "cfg.json",
                       **base_config(corpus, out=str(out / "run")))
    assert main(["intrusion", "--config", str(cfg)]) == 0
    return out / "run"


@pytest.fixture(scope="module")
def mimicry_run(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("mimicry")
    cfg = write_config(out / "cfg.json",
                       **base_config(corpus, ks=[2, 5], out=str(out / "run")))
    assert main(["mimicry", "--config", str(cfg)]) == 0
    return out / "run"


@pytest.fixture(scope="module")
def sca_gen_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sca")
    cfg = write_config(
        out / "gen.json",
        leakage={"n_traces": 4000, "trace_len": 100, "pois": [30, 60],
                 "poi_width": 3.0},
        out=str(out / "gen"))
    assert main(["sca-gen", "--config", str(cfg)]) == 0
    return out / "gen"


class TestIntrusionRun:
    def test_manifest_records_the_run(self, intrusion_run):
        manifest = read_manifest(intrusion_run)
        assert manifest["tool"] == "aegislab"
        assert manifest["experiment"] == "intrusion_baseline"
        assert manifest["status"] == "ok"
        assert manifest["seed"] == 0
        assert len(manifest["config_sha256"]) == 64
        assert set(manifest["timings"]) >= {"load", "split", "standardize",
                                            "train", "evaluate"}

    def test_artifact_set_covers_the_contract(self, intrusion_run):
        artifacts = set(read_manifest(intrusion_run)["artifacts"])
        assert {"config.json", "model.json", "metrics_holdout.json",
                "metrics_shifted.json"} <= artifacts
        svgs = {a for a in artifacts if a.endswith(".svg")}
        assert len(svgs) == 2  # feature scatter and metric comparison bars
        for svg in svgs:
            assert svg[:-len(".svg")] + ".csv" in artifacts
        for rel in artifacts:
            assert (intrusion_run / rel).is_file()

    def test_shift_degrades_accuracy(self, intrusion_run):
        holdout = json.loads((intrusion_run / "metrics_holdout.json").read_text())
        shifted = json.loads((intrusion_run / "metrics_shifted.json").read_text())
        assert shifted["confusion"]["accuracy"] < holdout["confusion"]["accuracy"]

    def test_config_copy_matches_the_resolved_config(self, intrusion_run):
        cfg = json.loads((intrusion_run / "config.json").read_text())
        assert cfg["experiment"] == "intrusion_baseline"
        assert cfg["train"]["seed"] == 0  # inherited from the top seed


class TestMimicryRun:
    def test_per_k_metrics_and_curve_are_written(self, mimicry_run):
        artifacts = set(read_manifest(mimicry_run)["artifacts"])
        assert {"metrics_k0.json", "metrics_k2.json", "metrics_k5.json",
                "importance.json", "pr_auc_vs_k.csv",
                "pr_auc_vs_k.svg"} <= artifacts
        with (mimicry_run / "pr_auc_vs_k.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["k", "pr_auc", "roc_auc", "recall"]
        assert [r[0] for r in rows[1:]] == ["0", "2", "5"]

    def test_aggressiveness_never_helps_the_detector(self, mimicry_run):
        pr = {k: json.loads((mimicry_run / f"metrics_k{k}.json").read_text())
              ["report"]["pr_auc"] for k in (0, 2, 5)}
        assert pr[2] <= pr[0] and pr[5] <= pr[0]

    def test_worst_k_confusion_chart_is_emitted(self, mimicry_run):
        artifacts = read_manifest(mimicry_run)["artifacts"]
        assert any(a.startswith("confusion_k") and a.endswith(".svg")
                   for a in artifacts)

    def test_importance_report_lists_spread(self, mimicry_run):
        imp = json.loads((mimicry_run / "importance.json").read_text())
        assert {"name", "drop", "std"} <= set(imp["columns"][0])

    def test_holdout_reference_variant_runs(self, corpus, tmp_path):
        cfg = write_config(tmp_path / "cfg.json",
                           **base_config(corpus, ks=[2],
                                         mimicry_reference="holdout",
                                         out=str(tmp_path / "run")))
        assert main(["mimicry", "--config", str(cfg)]) == 0
        assert (tmp_path / "run" / "metrics_k2.json").is_file()


class TestScaRuns:
    def test_generation_persists_traces(self, sca_gen_dir):
        assert "traces.bin" in read_manifest(sca_gen_dir)["artifacts"]

    def test_training_from_persisted_traces(self, sca_gen_dir, tmp_path):
        cfg = write_config(
            tmp_path / "train.json",
            train={"epochs": 20},
            leakage={"n_traces": 4000, "trace_len": 100, "pois": [30, 60],
                     "poi_width": 3.0, "traces": str(sca_gen_dir / "traces.bin"),
                     "poi_top_k": 6},
            out=str(tmp_path / "run"))
        assert main(["sca-train", "--config", str(cfg)]) == 0
        run = tmp_path / "run"
        artifacts = set(read_manifest(run)["artifacts"])
        assert {"poi.json", "snr.svg", "model.json", "summary.json",
                "epoch_curves.svg", "confusion_val.svg"} <= artifacts

        summary = json.loads((run / "summary.json").read_text())
        assert summary["n_traces"] == 4000
        assert summary["chance_level"] == pytest.approx(1 / 9)
        assert summary["flag"] == "leakage detected"
        assert summary["leakage_detected"] is True

        poi = json.loads((run / "poi.json").read_text())
        top = poi["top_indices"]
        assert len(top) == 6
        assert any(abs(i - 30) <= 2 for i in top)
        assert any(abs(i - 60) <= 2 for i in top)

    def test_zero_amplitude_control_reports_no_leakage(self, tmp_path):
        cfg = write_config(
            tmp_path / "c.json",
            train={"epochs": 10},
            leakage={"n_traces": 3000, "trace_len": 60, "pois": [20],
                     "poi_width": 3.0, "alpha": 0.0},
            out=str(tmp_path / "run"))
        assert main(["sca-train", "--config", str(cfg)]) == 0
        summary = json.loads((tmp_path / "run" / "summary.json").read_text())
        assert summary["flag"] == "no leakage detected"


class TestFailureHandling:
    def test_missing_training_data_fails_with_a_manifest(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", out=str(tmp_path / "run"))
        assert main(["train", "--config", str(cfg)]) == 1
        manifest = read_manifest(tmp_path / "run")
        assert manifest["status"] == "failed"
        assert manifest["failed_stage"] == "load"
        assert "data.train" in manifest["error"]

    def test_unreadable_dataset_fails_cleanly(self, tmp_path):
        cfg = write_config(tmp_path / "c.json",
                           data={"train": str(tmp_path / "absent.csv")},
                           out=str(tmp_path / "run"))
        assert main(["train", "--config", str(cfg)]) == 1
        assert read_manifest(tmp_path / "run")["status"] == "failed"


class TestDataDirResolution:
    def test_relative_paths_resolve_under_the_env_root(self, corpus, tmp_path,
                                                       monkeypatch):
        monkeypatch.setenv("AEGISLAB_DATA_DIR", str(corpus["train"].parent))
        cfg = write_config(tmp_path / "c.json",
                           data={"train": "train.csv"},
                           train={"n_trees": 5},
                           out=str(tmp_path / "run"))
        assert main(["train", "--config", str(cfg)]) == 0
        assert read_manifest(tmp_path / "run")["status"] == "ok"


class TestReport:
    def test_merges_runs_and_derives_detection_drop(self, corpus,
                                                    tmp_path_factory):
        out = tmp_path_factory.mktemp("report")
        base = base_config(corpus)

        intrusion_cfg = write_config(out / "i.json",
                                     **dict(base, out=str(out / "intrusion")))
        assert main(["intrusion", "--config", str(intrusion_cfg)]) == 0
        mimicry_cfg = write_config(out / "m.json",
                                   **dict(base, ks=[2], out=str(out / "mimicry")))
        assert main(["mimicry", "--config", str(mimicry_cfg)]) == 0

        assert main(["report", str(out / "intrusion" / "manifest.json"),
                     str(out / "mimicry" / "manifest.json"),
                     "--out", str(out / "summary")]) == 0

        report = json.loads((out / "summary" / "report.json").read_text())
        rows = report["runs"]
        assert [r["experiment"] for r in rows] == ["intrusion_baseline",
                                                   "mimicry_sweep"]
        baseline = rows[0]["pr_auc"]
        drop = rows[1]["pr_auc_drop"]["2"]
        assert drop == pytest.approx(
            baseline - rows[1]["sweep_pr_auc"]["2"], abs=1e-12)

        text = (out / "summary" / "report.txt").read_text()
        assert "intrusion_baseline" in text and "drop[" in text

    def test_seed_variants_share_a_config_hash(self, corpus, tmp_path):
        cfg0 = write_config(tmp_path / "a.json",
                            **base_config(corpus, out=str(tmp_path / "s0")))
        cfg1 = write_config(tmp_path / "b.json",
                            **base_config(corpus, out=str(tmp_path / "s1")))
        assert main(["train", "--config", str(cfg0)]) == 0
        assert main(["train", "--config", str(cfg1), "--seed", "1"]) == 0
        m0 = read_manifest(tmp_path / "s0")
        m1 = read_manifest(tmp_path / "s1")
        assert m0["seed"] == 0 and m1["seed"] == 1
        assert m0["config_sha256"] == m1["config_sha256"]
