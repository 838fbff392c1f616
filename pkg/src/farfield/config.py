"""Run configuration: YAML schema with defaults, presets, dotted-key overrides."""

import copy
from dataclasses import dataclass
from pathlib import Path

import yaml

from .losses import LossWeights


class UsageError(Exception):
    """Bad command line or config: maps to exit code 1."""


# Training-preset table: the supervised ablation grid plus the two unpaired mappers.
SEN_KIND = "sen"
CYCLEGAN_KIND = "cyclegan"


@dataclass(frozen=True)
class Preset:
    name: str
    kind: str
    weights: LossWeights
    source_domain: str | None = None  # unpaired mappers: the domain features map into


PRESETS = {
    "SEN1": Preset("SEN1", SEN_KIND, LossWeights(1.0, 0.0, 0.0)),
    "SEN2": Preset("SEN2", SEN_KIND, LossWeights(0.0, 1.0, 0.0)),
    "SEN3": Preset("SEN3", SEN_KIND, LossWeights(1.0, 1.0, 0.0)),
    "SEN4": Preset("SEN4", SEN_KIND, LossWeights(1.0, 0.1, 0.0)),
    "SEN5": Preset("SEN5", SEN_KIND, LossWeights(1.0, 0.01, 0.0)),
    "UEN": Preset("UEN", CYCLEGAN_KIND, LossWeights(0.0, 1.0, 2.5), "clean"),
    "DAN": Preset("DAN", CYCLEGAN_KIND, LossWeights(0.0, 1.0, 2.5), "noise"),
}


def get_preset(name: str) -> Preset:
    if name not in PRESETS:
        raise UsageError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
    return PRESETS[name]


# Defaults carry the full-scale values; desk-scale runs override via config file.
DEFAULT_CONFIG = {
    "out_dir": "runs/exp",
    "sample_rate": 16000,
    "preset": "SEN4",
    "simulate": {
        "n_speakers": 20,
        "utts_per_speaker": 10,
        "clips_per_utt": 2,
        "utt_seconds": 4.0,
        "sessions_per_speaker": 2,
        "n_noise": 12,
        "noise_seconds": 6.0,
        "eval_speakers": 6,
        "snr_filter_db": 19.0,
        "rt60_range": [0.0, 1.0],
        "snr_levels": [15.0, 10.0, 5.0, 0.0],
        "rir_seconds": 0.5,
    },
    "features": {
        "frame_length": 400,
        "frame_shift": 160,
        "fft_size": 512,
        "window": "povey",
        "n_mels": 40,
        "f_min": 20.0,
        "f_max": None,
        "log_floor": 1.0e-10,
        "centering_window": 301,
        "vad_mean_scale": 0.5,
        "vad_offset": 5.5,
        "amplitude_scale": 32768.0,
    },
    "model": {
        "base_filters": 32,
        "n_residual_blocks": 9,
        "disc_filters": [64, 128, 256, 512, 1],
    },
    "schedule": {
        "batch_size": 32,
        "seq_len": 127,
        "epochs": 50,
        "constant_epochs": 15,
        "lr_gen": 3.0e-4,
        "lr_disc": 1.0e-4,
        "lr_min": 1.0e-6,
        "adam_beta1": 0.5,
        "adam_beta2": 0.999,
    },
    "embedder": {
        "hidden_dim": 64,
        "embed_dim": 64,
        "kernel_sizes": [5, 3, 3],
        "dilations": [1, 2, 3],
        "epochs": 10,
        "seq_len": 200,
        "batch_size": 16,
        "lr": 1.0e-3,
        "train_archive": "clean_train",
    },
    "eval": {
        "enroll_durations": [5.0, 15.0, 30.0],
        "chunk_s": 60.0,
        "chunk_min_s": 10.0,
        "dcf": {"p_target": 0.05, "c_miss": 1.0, "c_fa": 1.0},
    },
}


def _deep_merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_config(path=None, overrides=()) -> dict:
    """Merge (defaults <- config file <- dotted-key overrides); the seed is mandatory."""
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        with open(path, encoding="utf-8") as f:
            loaded = yaml.safe_load(f) or {}
        if not isinstance(loaded, dict):
            raise ValueError(f"{path}: config root must be a mapping")
        config = _deep_merge(config, loaded)
    for item in overrides:
        config = apply_override(config, item)
    if "seed" not in config:
        raise UsageError("config must set an explicit seed (no implicit entropy)")
    return config


def apply_override(config: dict, item: str) -> dict:
    """Apply a 'dotted.key=value' override; values parse as YAML scalars."""
    if "=" not in item:
        raise UsageError(f"override {item!r} must look like key.path=value")
    key_path, raw = item.split("=", 1)
    node = config
    keys = key_path.split(".")
    for key in keys[:-1]:
        if not isinstance(node.get(key), dict):
            node[key] = {}
        node = node[key]
    node[keys[-1]] = yaml.safe_load(raw)
    return config


def serialize_config(config: dict) -> str:
    return yaml.safe_dump(config, sort_keys=True)


def parse_config(text: str) -> dict:
    return yaml.safe_load(text)


def run_paths(config: dict) -> dict:
    """The stable on-disk layout of one run directory."""
    out = Path(config["out_dir"])
    return {
        "root": out,
        "audio": out / "audio",
        "clips": out / "audio" / "clips",
        "clean": out / "audio" / "clean",
        "reverb": out / "audio" / "reverb",
        "noise_src": out / "audio" / "noise_src",
        "noise_domain": out / "audio" / "noise_domain",
        "manifests": out / "manifests",
        "features": out / "features",
        "models": out / "models",
        "enhanced": out / "enhanced",
        "eval": out / "eval",
    }
