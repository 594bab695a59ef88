"""Config-driven command-line front end.

Subcommands mirror the pipeline stages: ``synth`` writes a synthetic
dataset, ``perturb`` corrupts one channel of a dataset, ``train`` fits
the configured model families across seeds, ``evaluate`` runs the
robustness sweep, ``indices`` aggregates trade-off indices, and
``report`` renders figures and tables. Runs are described by one YAML
config (see configs/demo.yaml for the documented example); every artifact
embeds the config hash and base seed.

Exit codes: 0 success, 1 user error (config or data), 2 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import yaml

from . import corrupt, evaluate, forecast, frame as frame_mod, plugin, report, synth

ENV_OUTPUT_DIR = "SEWERBENCH_OUTPUT"
INDICES_SCHEMA = "tradeoff-indices/1"


class ConfigError(ValueError):
    """Raised for malformed or incomplete run configs."""


@dataclass(frozen=True)
class RunConfig:
    """Parsed run configuration plus provenance of the file it came from."""

    raw: dict
    config_sha256: str
    dataset_path: Path | None
    synth_cfg: synth.SynthConfig | None
    task: forecast.ForecastTask
    train_cfg: forecast.TrainConfig
    models: tuple[str, ...]
    plugins: tuple[dict, ...]
    n_seeds: int
    seed_base: int
    kinds: tuple[str, ...]
    rates: tuple[float, ...]
    error_params: dict
    features: tuple[str, ...] | None
    peak_window: int
    peak_fraction: float
    split_spec: dict
    output_dir: Path
    jobs: int


def load_config(path: str | Path, output_override: str | None = None,
                seed_base_override: int | None = None, jobs: int = 1) -> RunConfig:
    text = Path(path).read_text(encoding="utf-8")
    doc = yaml.safe_load(text)
    if not isinstance(doc, dict):
        raise ConfigError("config must be a YAML mapping")
    sha = hashlib.sha256(text.encode("utf-8")).hexdigest()

    dataset = doc.get("dataset", {})
    dataset_path = Path(dataset["path"]) if "path" in dataset else None
    synth_cfg = None
    if "synth" in dataset:
        try:
            synth_cfg = synth.SynthConfig(**dataset["synth"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad synth config: {exc}") from None
    if dataset_path is None and synth_cfg is None:
        raise ConfigError("dataset must declare either 'path' or 'synth'")

    try:
        task = forecast.ForecastTask(**doc.get("task", {}))
        train_cfg = forecast.TrainConfig(**doc.get("train", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad task/train config: {exc}") from None

    models = tuple(doc.get("models", ["persistence", "linear_direct"]))
    for family in models:
        if family not in forecast.FAMILIES or family == forecast.FAMILY_PLUGIN:
            raise ConfigError(f"unknown model family {family!r}")
    plugins = tuple(doc.get("plugins", []))
    for entry in plugins:
        if "name" not in entry or "command" not in entry:
            raise ConfigError("each plugin needs 'name' and 'command'")

    errors = doc.get("errors", {})
    kinds = tuple(errors.get("kinds", list(corrupt.KINDS)))
    for kind in kinds:
        if kind not in corrupt.KINDS:
            raise ConfigError(f"unknown error kind {kind!r}")
    rates = tuple(float(r) for r in errors.get("rates", [0.1, 0.2, 0.3, 0.4, 0.5]))
    error_params = {
        "alpha": float(errors.get("alpha", 1.1)),
        "beta": float(errors.get("beta", 0.1)),
        "q_lower": float(errors.get("q_lower", 0.2)),
        "q_upper": float(errors.get("q_upper", 0.8)),
        "cluster_mean_len": float(errors.get("cluster_mean_len", 24.0)),
    }

    peak = doc.get("peak", {})
    features = doc.get("features")
    output_dir = Path(
        output_override
        or doc.get("output_dir")
        or os.environ.get(ENV_OUTPUT_DIR, "runs/latest")
    )
    seed_base = int(doc.get("seed_base", 0)) if seed_base_override is None else seed_base_override
    return RunConfig(
        raw=doc,
        config_sha256=sha,
        dataset_path=dataset_path,
        synth_cfg=synth_cfg,
        task=task,
        train_cfg=train_cfg,
        models=models,
        plugins=plugins,
        n_seeds=int(doc.get("n_seeds", 10)),
        seed_base=seed_base,
        kinds=kinds,
        rates=rates,
        error_params=error_params,
        features=tuple(features) if features else None,
        peak_window=int(peak.get("window", 48)),
        peak_fraction=float(peak.get("top_fraction", 0.2)),
        split_spec=doc.get("split", {"train_frac": 0.6, "val_frac": 0.2}),
        output_dir=output_dir,
        jobs=jobs,
    )


def _meta(cfg: RunConfig) -> dict:
    return {"config_sha256": cfg.config_sha256, "seed_base": cfg.seed_base}


def _load_frame(cfg: RunConfig) -> frame_mod.TimeSeriesFrame:
    if cfg.dataset_path is not None:
        frame = frame_mod.load_dataset(cfg.dataset_path)
    else:
        frame = synth.generate(cfg.synth_cfg)
    data_channels = [c.name for c in frame.channels if c.role != "imputation_indicator"]
    gappy = [n for n in data_channels if np.isnan(frame.column(n)).any()]
    if gappy:
        frame = frame_mod.interpolate_missing(frame, gappy)
    if cfg.task.mode == "local" and frame.target_name + "__placeholder" not in frame.names:
        frame = frame_mod.make_placeholder_future(frame, cfg.task.horizon)
    return frame


def _split_frame(cfg: RunConfig, frame: frame_mod.TimeSeriesFrame):
    spec = cfg.split_spec
    if "train_end" in spec and "val_end" in spec:
        boundaries = frame_mod.ChronoSplit(
            frame_mod.parse_timestamp(spec["train_end"]),
            frame_mod.parse_timestamp(spec["val_end"]),
        )
    else:
        train_frac = float(spec.get("train_frac", 0.6))
        val_frac = float(spec.get("val_frac", 0.2))
        i_train = int(frame.length * train_frac)
        i_val = int(frame.length * (train_frac + val_frac))
        boundaries = frame_mod.ChronoSplit(frame.time_at(i_train), frame.time_at(i_val))
    return frame_mod.split(frame, boundaries)


def _default_features(frame: frame_mod.TimeSeriesFrame) -> tuple[str, ...]:
    return tuple(c.name for c in frame.channels if c.role != "imputation_indicator")


def _model_path(cfg: RunConfig, family: str, seed: int) -> Path:
    return cfg.output_dir / "models" / f"{family}-s{seed}.json"


# -- subcommands --------------------------------------------------------------


def cmd_synth(cfg: RunConfig) -> int:
    if cfg.synth_cfg is None:
        raise ConfigError("synth subcommand needs a dataset.synth section")
    frame = synth.generate(cfg.synth_cfg)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    csv_path = cfg.output_dir / "dataset.csv"
    frame_mod.write_csv(frame, csv_path)
    frame_mod.write_schema(frame, cfg.output_dir / "dataset.schema.yaml")
    print(f"wrote {csv_path} ({frame.length} rows, {len(frame.channels)} channels)")
    return 0


def cmd_perturb(cfg: RunConfig) -> int:
    section = cfg.raw.get("perturb")
    if not section or "channel" not in section:
        raise ConfigError("perturb subcommand needs a perturb section with a channel")
    frame = _load_frame(cfg)
    spec = corrupt.ErrorSpec(
        kind=section.get("kind", "missing"),
        rate=float(section.get("rate", 0.1)),
        alpha=float(section.get("alpha", cfg.error_params["alpha"])),
        beta=float(section.get("beta", cfg.error_params["beta"])),
        q_lower=float(section.get("q_lower", cfg.error_params["q_lower"])),
        q_upper=float(section.get("q_upper", cfg.error_params["q_upper"])),
        cluster_mean_len=float(section.get("cluster_mean_len", cfg.error_params["cluster_mean_len"])),
        seed=int(section.get("seed", cfg.seed_base)),
    )
    corrupted, mask = corrupt.perturb(frame, section["channel"], spec)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    frame_mod.write_csv(corrupted, cfg.output_dir / "perturbed.csv")
    frame_mod.write_schema(corrupted, cfg.output_dir / "perturbed.schema.yaml")
    corrupt.write_mask_csv([mask], cfg.output_dir / "perturbed_mask.csv")
    print(
        f"perturbed {section['channel']} with {spec.kind} rate {spec.rate}"
        f" -> effective rate {mask.effective_rate(frame.length):.4f}"
    )
    return 0


def cmd_train(cfg: RunConfig) -> int:
    frame = _load_frame(cfg)
    train, val, _ = _split_frame(cfg, frame)
    train_windows = forecast.build_windows(train, cfg.task)
    val_windows = forecast.build_windows(val, cfg.task)
    model_dir = cfg.output_dir / "models"
    model_dir.mkdir(parents=True, exist_ok=True)
    meta_entries = []
    for family in cfg.models:
        for i in range(cfg.n_seeds):
            seed = cfg.seed_base + i
            handle = forecast.fit(family, train_windows, val_windows, replace(cfg.train_cfg, seed=seed))
            path = _model_path(cfg, family, seed)
            path.write_bytes(forecast.to_bytes(handle))
            inference_time, size = forecast.measure_complexity(handle, val_windows)
            meta_entries.append(
                {
                    "family": family,
                    "seed": seed,
                    "param_count": handle.param_count,
                    "size_bytes": size,
                    "inference_time_s": inference_time,
                    "path": path.name,
                }
            )
            print(f"trained {family} seed {seed}: {handle.param_count} params, {size} bytes")
    meta_doc = {"schema": "model-meta/1", **_meta(cfg), "models": meta_entries}
    (model_dir / "meta.json").write_text(json.dumps(meta_doc, indent=2, sort_keys=True), encoding="utf-8")
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    frame = _load_frame(cfg)
    _, _, test = _split_frame(cfg, frame)
    handles = []
    for family in cfg.models:
        for i in range(cfg.n_seeds):
            path = _model_path(cfg, family, cfg.seed_base + i)
            if not path.exists():
                raise ConfigError(f"missing trained model {path}; run the train subcommand first")
            handles.append(forecast.from_bytes(path.read_bytes()))
    clients = []
    try:
        test_windows = forecast.build_windows(test, cfg.task)
        for entry in cfg.plugins:
            endpoint = plugin.PluginEndpoint(tuple(entry["command"]))
            for seed in range(cfg.seed_base, cfg.seed_base + min(2, cfg.n_seeds)):
                client = plugin.PluginClient(endpoint)
                client.handshake()
                clients.append(client)
                handles.append(plugin.plugin_handle(client, test_windows, seed))
        features = list(cfg.features or _default_features(test))
        records = evaluate.robustness_sweep(
            handles,
            test,
            cfg.task,
            features=features,
            kinds=list(cfg.kinds),
            rates=list(cfg.rates),
            seed_base=cfg.seed_base,
            peak_window=cfg.peak_window,
            peak_fraction=cfg.peak_fraction,
            jobs=cfg.jobs,
            **cfg.error_params,
        )
    finally:
        for client in clients:
            client.close()
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    records_path = cfg.output_dir / "records.jsonl"
    evaluate.write_records(records_path, records, _meta(cfg))
    failed = sum(1 for r in records if r.error is not None)
    print(f"wrote {records_path} ({len(records)} records, {failed} failed cells)")
    return 0


def cmd_indices(cfg: RunConfig) -> int:
    records, _ = evaluate.read_records(cfg.output_dir / "records.jsonl")
    meta_path = cfg.output_dir / "models" / "meta.json"
    if not meta_path.exists():
        raise ConfigError(f"missing {meta_path}; run the train subcommand first")
    meta_doc = json.loads(meta_path.read_text(encoding="utf-8"))
    by_family: dict[str, list[tuple[float, float]]] = {}
    for entry in meta_doc["models"]:
        by_family.setdefault(entry["family"], []).append(
            (entry["inference_time_s"], entry["size_bytes"])
        )
    complexity = {
        family: (float(np.median([t for t, _ in pairs])), float(np.median([s for _, s in pairs])))
        for family, pairs in by_family.items()
    }
    doc = {"schema": INDICES_SCHEMA, **_meta(cfg), "mode": cfg.task.mode}
    if cfg.task.mode == "local":
        doc["local_robustness_iqr"] = evaluate.local_robustness(records)
        doc["cci"] = evaluate.cci(complexity)
    else:
        indices = evaluate.tradeoff_indices(records, complexity)
        doc["models"] = {
            name: {"cci": idx.cci, "ri": idx.ri, "components": idx.components}
            for name, idx in indices.items()
        }
    out_path = cfg.output_dir / "indices.json"
    out_path.write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")
    print(f"wrote {out_path}")
    return 0


def cmd_report(cfg: RunConfig) -> int:
    records, meta = evaluate.read_records(cfg.output_dir / "records.jsonl")
    indices_path = cfg.output_dir / "indices.json"
    indices = None
    if indices_path.exists():
        doc = json.loads(indices_path.read_text(encoding="utf-8"))
        if "models" in doc:
            indices = {
                name: evaluate.TradeoffIndices(entry["cci"], entry["ri"], entry["components"])
                for name, entry in doc["models"].items()
            }
        elif "cci" in doc:  # local-mode runs carry CCI but no RI
            indices = {
                name: evaluate.TradeoffIndices(value, float("nan"))
                for name, value in doc["cci"].items()
            }
    written = report.render_report(records, indices, cfg.output_dir / "report", meta, cfg.task.mode)
    for path in written:
        print(f"wrote {path}")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "perturb": cmd_perturb,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "indices": cmd_indices,
    "report": cmd_report,
}

USER_ERRORS = (
    ConfigError,
    corrupt.CorruptionError,
    evaluate.EvalError,
    forecast.ForecastError,
    frame_mod.FrameError,
    FileNotFoundError,
    yaml.YAMLError,
    ValueError,
)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="sewerbench",
        description="Robustness evaluation harness for sewer time-series forecasting",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="run config YAML")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers for the sweep")
    parser.add_argument("--seed-base", type=int, default=None, help="override the config seed base")
    parser.add_argument("--output", default=None, help="override the output directory")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.output, args.seed_base, args.jobs)
        return COMMANDS[args.command](cfg)
    except USER_ERRORS as exc:
        print(json.dumps({"error": {"stage": args.command, "message": str(exc)}}), file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - internal failures
        print(json.dumps({"error": {"stage": args.command, "message": f"internal: {exc}"}}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
