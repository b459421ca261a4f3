"""Config-driven experiment runner with persisted, reproducible artifacts.

Every run reads one JSON config, writes a resolved copy plus a manifest
into its output directory, and emits results only to files; progress goes
to standard error as single-line key=value events. Identical configs
produce byte-identical metrics artifacts.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__, plots
from .corpus import write_corpus
from .data import (
    SplitSpec,
    load_cicids,
    load_nslkdd,
    load_table,
    save_table,
    split,
    standardize,
)
from .errors import AegislabError, ConfigError
from .importance import binary_scores, permutation_importance
from .learners import (
    MLP,
    DecisionTree,
    ForestConfig,
    LogisticConfig,
    LogisticRegression,
    MLPConfig,
    RandomForest,
    TreeConfig,
    save_model,
)
from .metrics import score_report
from .mimicry import mimicry_sweep
from .sca import (
    LeakageConfig,
    detect_pois,
    generate_traces,
    load_traces,
    save_traces,
    train_leakage_classifier,
)

logger = logging.getLogger("aegislab")

DATA_DIR_ENV = "AEGISLAB_DATA_DIR"

_LOADERS = {"nslkdd": load_nslkdd, "cicids": load_cicids, "table": load_table}

_EXPERIMENT_FOR_COMMAND = {
    "ingest": "ingest",
    "synth": "synth",
    "train": "train",
    "intrusion": "intrusion_baseline",
    "importance": "importance",
    "mimicry": "mimicry_sweep",
    "sca-gen": "sca_leakage",
    "sca-train": "sca_leakage",
}

_CONFIG_DEFAULTS: dict = {
    "experiment": None,
    "seed": 0,
    "out": None,
    "data": {
        "train": None,
        "test": None,
        "format": "nslkdd",
    },
    "split": {
        "mode": "stratified-random",
        "fraction": 0.7,
        "seed": None,
    },
    "train": {
        "kind": "random_forest",
        "n_trees": 100,
        "max_depth": 20,
        "min_samples_leaf": 2,
        "mtry": None,
        "n_jobs": 1,
        "learning_rate": 0.01,
        "epochs": 50,
        "batch_size": 128,
        "momentum": 0.9,
        "l2": 0.0,
        "max_iter": 1000,
        "hidden": [64, 32],
        "seed": None,
    },
    "importance": {
        "metric": "pr_auc",
        "repeats": 10,
        "top_n": 10,
    },
    "ks": [5, 10, 20],
    "threshold": 0.5,
    "mimicry_reference": "train",
    "scatter": ["src_bytes", "dst_bytes"],
    "leakage": {
        "n_traces": 50000,
        "trace_len": 400,
        "pois": [100, 200, 300],
        "poi_width": 5.0,
        "alpha": 0.25,
        "sigma": 1.0,
        "key_byte": 43,
        "leak_model": "sbox_out",
        "seed": None,
        "val_fraction": 0.2,
        "mlp_l2": 0.01,
        "poi_top_k": 10,
        "traces": None,
    },
    "corpus": {
        "n_train": 13000,
        "n_test": 7000,
    },
}


# ---------------------------------------------------------------------------
# Config resolution
# ---------------------------------------------------------------------------

def _event(name: str, **fields) -> None:
    parts = [f"event={name}"]
    for key, value in fields.items():
        text = str(value)
        parts.append(f"{key}={text!r}" if " " in text else f"{key}={text}")
    logger.info(" ".join(parts))


def _merge_defaults(defaults: dict, override: dict, path: str = "") -> dict:
    out = {}
    for key, base in defaults.items():
        if key in override:
            value = override[key]
            if isinstance(base, dict):
                if not isinstance(value, dict):
                    raise ConfigError(f"config field {path}{key} must be an object")
                out[key] = _merge_defaults(base, value, f"{path}{key}.")
            else:
                out[key] = value
        else:
            out[key] = dict(base) if isinstance(base, dict) else base
    unknown = set(override) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown config field(s): "
                          f"{', '.join(sorted(path + u for u in unknown))}")
    return out


def load_config(path: Path | None, command: str,
                seed_override: int | None, out_override: Path | None) -> dict:
    """Read, default-fill and validate a run config.

    The top-level seed flows into every stochastic sub-config whose own
    seed is left null; --seed and --out override their config fields.
    """
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
    cfg = _merge_defaults(_CONFIG_DEFAULTS, raw)

    expected = _EXPERIMENT_FOR_COMMAND[command]
    if cfg["experiment"] is None:
        cfg["experiment"] = expected
    elif cfg["experiment"] != expected:
        raise ConfigError(
            f"config experiment {cfg['experiment']!r} does not match "
            f"command {command!r} (expected {expected!r})")

    if seed_override is not None:
        cfg["seed"] = seed_override
    cfg["seed"] = int(cfg["seed"])
    for section in ("split", "train", "leakage"):
        if cfg[section]["seed"] is None:
            cfg[section]["seed"] = cfg["seed"]
    if cfg["mimicry_reference"] not in ("train", "holdout"):
        raise ConfigError(
            f"mimicry_reference must be 'train' or 'holdout', "
            f"got {cfg['mimicry_reference']!r}")
    if out_override is not None:
        cfg["out"] = str(out_override)
    if cfg["out"] is None:
        cfg["out"] = str(Path("runs") / cfg["experiment"])
    return cfg


def _strip_seeds(obj):
    if isinstance(obj, dict):
        return {k: _strip_seeds(v) for k, v in obj.items() if k != "seed"}
    if isinstance(obj, list):
        return [_strip_seeds(v) for v in obj]
    return obj


def config_hash(cfg: dict) -> str:
    """Identity of the run setup: canonical JSON digest, seeds and output
    directory masked.

    Masking keeps runs that differ only in seed or destination under one
    hash so a report can group them as repetitions of the same experiment.
    """
    view = _strip_seeds({k: v for k, v in cfg.items() if k != "out"})
    canon = json.dumps(view, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _data_path(value: str) -> Path:
    path = Path(value)
    base = os.environ.get(DATA_DIR_ENV)
    if base and not path.is_absolute():
        candidate = Path(base) / path
        if candidate.exists() or not path.exists():
            return candidate
    return path


def _load_dataset(cfg: dict, which: str, schema=None):
    """Load one configured dataset; ``schema`` re-encodes under a fit layout."""
    value = cfg["data"][which]
    if value is None:
        raise ConfigError(f"config data.{which} path is required")
    fmt = cfg["data"]["format"]
    loader = _LOADERS.get(fmt)
    if loader is None:
        raise ConfigError(f"unknown data format {fmt!r}")
    if schema is not None and fmt != "table":
        return loader(_data_path(value), schema=schema)
    table = loader(_data_path(value))
    if schema is not None and table.schema.encoded_width != schema.encoded_width:
        raise ConfigError(
            f"data.{which} column layout does not match the training schema")
    return table


def build_model(train_cfg: dict):
    """Instantiate the configured learner, unfitted."""
    kind = train_cfg["kind"]
    if kind == "random_forest":
        return RandomForest(ForestConfig(
            n_trees=int(train_cfg["n_trees"]),
            max_depth=int(train_cfg["max_depth"]),
            min_samples_leaf=int(train_cfg["min_samples_leaf"]),
            mtry=None if train_cfg["mtry"] is None else int(train_cfg["mtry"]),
            seed=int(train_cfg["seed"]),
            n_jobs=int(train_cfg["n_jobs"]),
        ))
    if kind == "decision_tree":
        return DecisionTree(TreeConfig(
            max_depth=int(train_cfg["max_depth"]),
            min_samples_leaf=int(train_cfg["min_samples_leaf"]),
        ))
    if kind == "logistic":
        return LogisticRegression(LogisticConfig(
            learning_rate=float(train_cfg["learning_rate"]),
            max_iter=int(train_cfg["max_iter"]),
            l2=float(train_cfg["l2"]),
        ))
    if kind == "mlp":
        return MLP(MLPConfig(
            hidden=tuple(int(h) for h in train_cfg["hidden"]),
            n_classes=2,
            batch_size=int(train_cfg["batch_size"]),
            learning_rate=float(train_cfg["learning_rate"]),
            momentum=float(train_cfg["momentum"]),
            epochs=int(train_cfg["epochs"]),
            l2=float(train_cfg["l2"]),
            seed=int(train_cfg["seed"]),
        ))
    raise ConfigError(f"unknown learner kind {kind!r}")


# ---------------------------------------------------------------------------
# Run bookkeeping
# ---------------------------------------------------------------------------

def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


class Run:
    """Output directory, artifact list and stage timings for one run."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.out = Path(cfg["out"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts: list[str] = []
        self.timings: dict[str, float] = {}
        config_copy = self.out / "config.json"
        _write_json(config_copy, cfg)
        self.add(config_copy)
        _event("run_start", experiment=cfg["experiment"], out=self.out,
               seed=cfg["seed"], config_sha256=config_hash(cfg)[:12])

    def add(self, *paths: Path) -> None:
        for p in paths:
            rel = os.path.relpath(p, self.out)
            if rel not in self.artifacts:
                self.artifacts.append(rel)

    @contextmanager
    def stage(self, name: str):
        _event("stage_start", stage=name)
        begin = time.perf_counter()
        try:
            yield
        except Exception as exc:
            elapsed = time.perf_counter() - begin
            self.timings[name] = round(elapsed, 3)
            _event("stage_failed", stage=name, seconds=f"{elapsed:.3f}",
                   error=type(exc).__name__)
            self.finish(status="failed", failed_stage=name, error=str(exc))
            raise
        elapsed = time.perf_counter() - begin
        self.timings[name] = round(elapsed, 3)
        _event("stage_done", stage=name, seconds=f"{elapsed:.3f}")

    def finish(self, status: str = "ok", failed_stage: str | None = None,
               error: str | None = None) -> Path:
        manifest = {
            "tool": "aegislab",
            "version": __version__,
            "experiment": self.cfg["experiment"],
            "config_sha256": config_hash(self.cfg),
            "seed": self.cfg["seed"],
            "status": status,
            "artifacts": sorted(self.artifacts),
            "timings": self.timings,
        }
        if failed_stage is not None:
            manifest["failed_stage"] = failed_stage
            manifest["error"] = error
        path = self.out / "manifest.json"
        _write_json(path, manifest)
        _event("run_done", status=status, manifest=path)
        return path


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def _binary_metrics(labels, scores, threshold: float) -> dict:
    return score_report(labels, scores, threshold=threshold).to_dict()


def run_synth(cfg: dict) -> Path:
    run = Run(cfg)
    with run.stage("synthesize"):
        written = write_corpus(run.out, n_train=int(cfg["corpus"]["n_train"]),
                               n_test=int(cfg["corpus"]["n_test"]),
                               seed=cfg["seed"])
        run.add(*written)
    return run.finish()


def run_ingest(cfg: dict) -> Path:
    run = Run(cfg)
    with run.stage("ingest_train"):
        table = _load_dataset(cfg, "train")
        out_path = run.out / "train.table.csv"
        save_table(table, out_path)
        run.add(out_path, out_path.with_name(out_path.name + ".schema.json"))
    if cfg["data"]["test"] is not None:
        with run.stage("ingest_test"):
            table = _load_dataset(cfg, "test")
            out_path = run.out / "test.table.csv"
            save_table(table, out_path)
            run.add(out_path,
                    out_path.with_name(out_path.name + ".schema.json"))
    return run.finish()


def _fit_on_split(cfg: dict, run: Run):
    """Shared front half: load, split, standardize, fit, persist model."""
    with run.stage("load"):
        table = _load_dataset(cfg, "train")
    with run.stage("split"):
        spec = SplitSpec(mode=cfg["split"]["mode"],
                         fraction=float(cfg["split"]["fraction"]),
                         seed=int(cfg["split"]["seed"]))
        fit_part, holdout = split(table, spec)
    with run.stage("standardize"):
        fit_std, (holdout_std,), scaler = standardize(fit_part, [holdout])
    with run.stage("train"):
        model = build_model(cfg["train"]).fit(fit_std.rows, fit_std.labels)
        model_path = run.out / "model.json"
        save_model(model, model_path)
        run.add(model_path)
    return table, fit_std, holdout_std, scaler, model


def run_train(cfg: dict) -> Path:
    run = Run(cfg)
    _, fit_std, holdout_std, _, model = _fit_on_split(cfg, run)
    with run.stage("evaluate"):
        report = _binary_metrics(holdout_std.labels,
                                 binary_scores(model, holdout_std.rows),
                                 cfg["threshold"])
        metrics_path = run.out / "metrics_holdout.json"
        _write_json(metrics_path, report)
        run.add(metrics_path)
    return run.finish()


def run_intrusion_baseline(cfg: dict) -> Path:
    run = Run(cfg)
    table, fit_std, holdout_std, scaler, model = _fit_on_split(cfg, run)
    with run.stage("scatter"):
        x_name, y_name = cfg["scatter"]
        names = table.schema.encoded_names
        if x_name in names and y_name in names:
            run.add(*plots.scatter_features(table, x_name, y_name,
                                            run.out / "scatter_bytes"))
        else:
            _event("scatter_skipped", missing=f"{x_name}/{y_name}")
    with run.stage("evaluate"):
        holdout_report = _binary_metrics(
            holdout_std.labels, binary_scores(model, holdout_std.rows),
            cfg["threshold"])
        _write_json(run.out / "metrics_holdout.json", holdout_report)

        test_table = _load_dataset(cfg, "test", schema=table.schema)
        test_std = type(test_table)(
            schema=test_table.schema, rows=scaler.apply(test_table.rows),
            labels=test_table.labels, row_ids=test_table.row_ids)
        shifted_report = _binary_metrics(
            test_std.labels, binary_scores(model, test_std.rows),
            cfg["threshold"])
        _write_json(run.out / "metrics_shifted.json", shifted_report)
        run.add(run.out / "metrics_holdout.json",
                run.out / "metrics_shifted.json")
    with run.stage("plots"):
        metric_names = ("accuracy", "pr_auc", "recall")
        series = {
            "in-distribution": [holdout_report["confusion"]["accuracy"],
                                holdout_report["pr_auc"],
                                holdout_report["confusion"]["recall"]],
            "shifted": [shifted_report["confusion"]["accuracy"],
                        shifted_report["pr_auc"],
                        shifted_report["confusion"]["recall"]],
        }
        run.add(*plots.bars_comparison(metric_names, series,
                                       run.out / "metrics_compare"))
    return run.finish()


def _numeric_ranking(result, schema) -> list[str]:
    """Importance order restricted to numeric origin columns."""
    numeric = {c.name for c in schema.columns if c.kind == "numeric"}
    full = result.top_k(len(result.names))
    return [name for name, _ in full if name in numeric]


def run_importance(cfg: dict) -> Path:
    run = Run(cfg)
    _, fit_std, holdout_std, _, model = _fit_on_split(cfg, run)
    with run.stage("importance"):
        result = permutation_importance(
            model, holdout_std, metric=cfg["importance"]["metric"],
            repeats=int(cfg["importance"]["repeats"]), seed=cfg["seed"])
        _write_json(run.out / "importance.json", result.to_dict())
        run.add(run.out / "importance.json")
        run.add(*plots.bars_importance(result, int(cfg["importance"]["top_n"]),
                                       run.out / "importance"))
    return run.finish()


def run_mimicry_sweep(cfg: dict) -> Path:
    run = Run(cfg)
    table, fit_std, holdout_std, _, model = _fit_on_split(cfg, run)
    with run.stage("importance"):
        result = permutation_importance(
            model, holdout_std, metric=cfg["importance"]["metric"],
            repeats=int(cfg["importance"]["repeats"]), seed=cfg["seed"])
        _write_json(run.out / "importance.json", result.to_dict())
        run.add(run.out / "importance.json")
        run.add(*plots.bars_importance(result, int(cfg["importance"]["top_n"]),
                                       run.out / "importance"))
    with run.stage("sweep"):
        ranking = _numeric_ranking(result, table.schema)
        reference = fit_std if cfg["mimicry_reference"] == "train" else holdout_std
        points = mimicry_sweep(model, reference, holdout_std, ranking,
                               ks=[int(k) for k in cfg["ks"]],
                               threshold=cfg["threshold"])
        for point in points:
            path = run.out / f"metrics_k{point.k}.json"
            _write_json(path, point.to_dict())
            run.add(path)
        run.add(*plots.sweep_curve(points, run.out / "pr_auc_vs_k"))
    with run.stage("worst_k"):
        worst = min((p for p in points if p.k > 0),
                    default=points[0], key=lambda p: p.report.pr_auc)
        conf = worst.report.confusion
        matrix = np.array([[conf.tn, conf.fp], [conf.fn, conf.tp]])
        run.add(*plots.confusion_heatmap(matrix, ("benign", "attack"),
                                         run.out / f"confusion_k{worst.k}"))
        _event("worst_k", k=worst.k, pr_auc=f"{worst.report.pr_auc:.4f}")
    return run.finish()


def _leakage_config(cfg: dict) -> LeakageConfig:
    lk = cfg["leakage"]
    return LeakageConfig(
        n_traces=int(lk["n_traces"]),
        trace_len=int(lk["trace_len"]),
        pois=tuple(int(p) for p in lk["pois"]),
        poi_width=float(lk["poi_width"]),
        alpha=float(lk["alpha"]),
        sigma=float(lk["sigma"]),
        key_byte=int(lk["key_byte"]),
        leak_model=str(lk["leak_model"]),
        seed=int(lk["seed"]),
    )


def run_sca_gen(cfg: dict) -> Path:
    run = Run(cfg)
    with run.stage("generate"):
        ts = generate_traces(_leakage_config(cfg))
        traces_path = run.out / "traces.bin"
        save_traces(ts, traces_path)
        run.add(traces_path)
    return run.finish()


def run_sca_train(cfg: dict) -> Path:
    run = Run(cfg)
    lk = cfg["leakage"]
    with run.stage("traces"):
        if lk["traces"] is not None:
            ts = load_traces(_data_path(lk["traces"]))
        else:
            ts = generate_traces(_leakage_config(cfg))
    with run.stage("pois"):
        poi = detect_pois(ts.traces, ts.labels, top_k=int(lk["poi_top_k"]))
        _write_json(run.out / "poi.json", poi.to_dict())
        run.add(run.out / "poi.json")
        run.add(*plots.snr_plot(poi.snr, poi.top_indices, run.out / "snr"))
    with run.stage("train"):
        mlp_cfg = MLPConfig(
            hidden=tuple(int(h) for h in cfg["train"]["hidden"]),
            n_classes=9,
            batch_size=int(cfg["train"]["batch_size"]),
            learning_rate=float(cfg["train"]["learning_rate"]),
            momentum=float(cfg["train"]["momentum"]),
            epochs=int(cfg["train"]["epochs"]),
            l2=float(lk["mlp_l2"]),
            seed=int(ts.config.seed),
        )
        report = train_leakage_classifier(
            ts, val_fraction=float(lk["val_fraction"]), mlp_config=mlp_cfg)
        model_path = run.out / "model.json"
        save_model(report.model, model_path)
        run.add(model_path)
    with run.stage("summarize"):
        margin = report.val_accuracy - report.val_prevalence
        summary = {
            "n_traces": int(ts.n),
            "alpha": float(ts.config.alpha),
            "train_accuracy": report.train_accuracy,
            "val_accuracy": report.val_accuracy,
            "val_prevalence": report.val_prevalence,
            "chance_level": 1.0 / 9.0,
            "accuracy_minus_prevalence": margin,
            "leakage_detected": bool(margin >= 0.03),
            "flag": "leakage detected" if margin >= 0.03 else "no leakage detected",
        }
        _write_json(run.out / "summary.json", summary)
        run.add(run.out / "summary.json")
        _event("leakage", flag=summary["flag"],
               val_accuracy=f"{report.val_accuracy:.4f}")
    with run.stage("plots"):
        run.add(*plots.epoch_curves(report.curves, run.out / "epoch_curves"))
        run.add(*plots.confusion_heatmap(
            report.confusion, tuple(str(c) for c in range(9)),
            run.out / "confusion_val"))
    return run.finish()


# ---------------------------------------------------------------------------
# Consolidated report
# ---------------------------------------------------------------------------

def _load_run(manifest_path: Path) -> dict:
    manifest = json.loads(manifest_path.read_text())
    base = manifest_path.parent
    metrics: dict[str, dict] = {}
    for rel in manifest.get("artifacts", []):
        if not rel.endswith(".json") or rel in ("config.json", "manifest.json"):
            continue
        name = Path(rel).name
        if name.startswith(("metrics_", "summary", "importance", "poi")):
            try:
                metrics[name[:-len(".json")]] = json.loads((base / rel).read_text())
            except (OSError, ValueError):
                continue
    return {"manifest": manifest, "metrics": metrics}


def _run_row(run: dict) -> dict:
    manifest = run["manifest"]
    metrics = run["metrics"]
    row = {
        "experiment": manifest.get("experiment", "?"),
        "config": manifest.get("config_sha256", "")[:10],
        "seed": manifest.get("seed"),
        "status": manifest.get("status", "?"),
    }
    holdout = metrics.get("metrics_holdout")
    if holdout:
        row["pr_auc"] = holdout["pr_auc"]
        row["accuracy"] = holdout["confusion"]["accuracy"]
        row["recall"] = holdout["confusion"]["recall"]
    shifted = metrics.get("metrics_shifted")
    if shifted:
        row["shifted_accuracy"] = shifted["confusion"]["accuracy"]
    summary = metrics.get("summary")
    if summary:
        row["val_accuracy"] = summary["val_accuracy"]
        row["val_prevalence"] = summary["val_prevalence"]
        row["flag"] = summary["flag"]
    sweep = {}
    for name, obj in metrics.items():
        if name.startswith("metrics_k"):
            sweep[int(name[len("metrics_k"):])] = obj["report"]["pr_auc"]
    if sweep:
        row["sweep_pr_auc"] = {str(k): sweep[k] for k in sorted(sweep)}
    return row


def run_report(manifest_paths: list[Path], out_dir: Path) -> Path:
    runs = [_load_run(p) for p in manifest_paths]
    rows = [_run_row(r) for r in runs]

    baseline = None
    for row in rows:
        if row["experiment"] == "intrusion_baseline" and "pr_auc" in row:
            baseline = row["pr_auc"]
            break
    for row in rows:
        sweep = row.get("sweep_pr_auc")
        if not sweep:
            continue
        base = baseline if baseline is not None else sweep.get("0")
        if base is not None:
            row["pr_auc_drop"] = {k: base - v for k, v in sweep.items()}

    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "report.json"
    _write_json(json_path, {"tool": "aegislab", "version": __version__,
                            "runs": rows})

    lines = ["experiment            config      seed  status  key metrics",
             "-" * 72]
    for row in rows:
        keys = []
        for name in ("pr_auc", "accuracy", "recall", "shifted_accuracy",
                     "val_accuracy", "val_prevalence"):
            if name in row:
                keys.append(f"{name}={row[name]:.4f}")
        if "flag" in row:
            keys.append(f"flag={row['flag']!r}")
        if "sweep_pr_auc" in row:
            pairs = ", ".join(f"k{k}={v:.4f}"
                              for k, v in row["sweep_pr_auc"].items())
            keys.append(f"sweep[{pairs}]")
        if "pr_auc_drop" in row:
            pairs = ", ".join(f"k{k}={v:.4f}"
                              for k, v in row["pr_auc_drop"].items())
            keys.append(f"drop[{pairs}]")
        lines.append(f"{row['experiment']:<21} {row['config']:<11} "
                     f"{row['seed']!s:<5} {row['status']:<7} {'; '.join(keys)}")
    text_path = out_dir / "report.txt"
    text_path.write_text("\n".join(lines) + "\n")
    _event("report_written", runs=len(rows), out=out_dir)
    return json_path


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

_RUNNERS = {
    "synth": run_synth,
    "ingest": run_ingest,
    "train": run_train,
    "intrusion": run_intrusion_baseline,
    "importance": run_importance,
    "mimicry": run_mimicry_sweep,
    "sca-gen": run_sca_gen,
    "sca-train": run_sca_train,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aegislab",
        description="Intrusion-detection robustness and side-channel "
                    "leakage experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "synth": "write a synthetic flow corpus in NSL-KDD layout",
        "ingest": "parse raw datasets into canonical tables",
        "train": "fit the configured detector and score its holdout",
        "intrusion": "baseline plus distribution-shift evaluation",
        "importance": "permutation importance of the fitted detector",
        "mimicry": "importance-guided mimicry sweep over k",
        "sca-gen": "generate and persist a synthetic trace set",
        "sca-train": "detect POIs and train the leakage classifier",
    }
    for name, help_text in helps.items():
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", type=Path, default=None,
                         help="JSON config file (defaults apply without it)")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the config seed")
        cmd.add_argument("--out", type=Path, default=None,
                         help="override the output directory")
    rep = sub.add_parser("report", help="merge run manifests into one summary")
    rep.add_argument("manifests", nargs="+", type=Path,
                     help="manifest.json files from earlier runs")
    rep.add_argument("--out", type=Path, default=Path("."),
                     help="directory for report.txt and report.json")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(message)s")
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "report":
            run_report(args.manifests, args.out)
            return 0
        cfg = load_config(args.config, args.command, args.seed, args.out)
    except ConfigError as exc:
        _event("config_error", error=str(exc))
        return 2
    try:
        _RUNNERS[args.command](cfg)
    except AegislabError as exc:
        _event("run_failed", error=str(exc))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
