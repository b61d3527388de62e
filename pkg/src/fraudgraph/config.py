"""Run configuration files and run manifests.

Configs are flat `key = value` text files ('#' starts a comment). Every run
resolves its config against per-command defaults, echoes the fully resolved
mapping into a manifest, and can be re-run from that manifest bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

from .data import SyntheticConfig
from .errors import ConfigError
from .training import TrainConfig


def parse_config_file(path) -> dict[str, str]:
    raw: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = stripped.split("=", 1)
        raw[key.strip()] = value.strip()
    return raw


def _to_bool(text: str, key: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key} must be a boolean, got {text!r}")


def _to_int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {text!r}") from None


def _to_float(text: str, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {text!r}") from None


def _to_int_list(text: str, key: str) -> list[int]:
    if not text:
        return []
    return [_to_int(part.strip(), key) for part in text.split(",") if part.strip()]


def _to_str_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


_SYNTH_DEFAULTS = {
    "n_regions": 3,
    "txns_per_region": 2000,
    "n_card_holders": 100,
    "n_merchants": 300,
    "fraud_rate": 0.1,
    "fraud_time_slices": [22, 23],
    "region_shift_strength": 1.0,
    "seed": 0,
}

_TRAIN_DEFAULTS = {
    "learning_rate": 0.05,
    "weight_decay": 0.001,
    "max_epochs": 200,
    "patience": 20,
    "seed": 0,
    "replay_ratio": 0.15,
    "smoothing_lambda": 1.5,
    "smoothing_gamma": 0.00025,
    "variant": "full",
    "d_hidden": 64,
    "n_heads": 8,
    "d_semantic": 128,
    "leaky_slope": 0.2,
    "activation": "elu",
    "train_fraction": 0.6,
    "val_fraction": 0.1,
    "prototype_sigma_scale": 0.1,
    "fisher_max_samples": None,
    "threshold": 0.5,
}

_CONVERTERS = {
    "n_regions": _to_int,
    "txns_per_region": _to_int,
    "n_card_holders": _to_int,
    "n_merchants": _to_int,
    "fraud_rate": _to_float,
    "fraud_time_slices": _to_int_list,
    "region_shift_strength": _to_float,
    "seed": _to_int,
    "learning_rate": _to_float,
    "weight_decay": _to_float,
    "max_epochs": _to_int,
    "patience": _to_int,
    "replay_ratio": _to_float,
    "smoothing_lambda": _to_float,
    "smoothing_gamma": _to_float,
    "variant": lambda t, k: t,
    "d_hidden": _to_int,
    "n_heads": _to_int,
    "d_semantic": _to_int,
    "leaky_slope": _to_float,
    "activation": lambda t, k: t,
    "train_fraction": _to_float,
    "val_fraction": _to_float,
    "prototype_sigma_scale": _to_float,
    "fisher_max_samples": lambda t, k: None if t.lower() in ("none", "") else _to_int(t, k),
    "threshold": _to_float,
    "synthetic": _to_bool,
    "data_path": lambda t, k: t,
    "data_paths": lambda t, k: _to_str_list(t),
    "out_dir": lambda t, k: t,
}

_COMMAND_KEYS = {
    "synth": set(_SYNTH_DEFAULTS) | {"out_dir"},
    "single": set(_TRAIN_DEFAULTS)
    | set(_SYNTH_DEFAULTS)
    | {"synthetic", "data_path", "out_dir"},
    "sequence": set(_TRAIN_DEFAULTS)
    | set(_SYNTH_DEFAULTS)
    | {"synthetic", "data_paths", "out_dir"},
}


def resolve_config(raw: dict, command: str) -> dict:
    """Coerce raw string values, fill defaults, reject unknown keys."""
    allowed = _COMMAND_KEYS[command]
    resolved: dict = {}
    if command in ("synth", "single", "sequence"):
        resolved.update(_SYNTH_DEFAULTS)
    if command in ("single", "sequence"):
        resolved.update(_TRAIN_DEFAULTS)
        resolved["synthetic"] = True
        resolved["data_path" if command == "single" else "data_paths"] = (
            "" if command == "single" else []
        )
    resolved.setdefault("out_dir", "runs/" + command)
    for key, value in raw.items():
        base = key.split(".", 1)[0]
        if key.startswith("col_"):
            resolved[key] = value
            continue
        if base not in allowed:
            raise ConfigError(f"unknown config key {key!r} for command {command!r}")
        if isinstance(value, str):
            resolved[key] = _CONVERTERS[key](value, key)
        else:
            resolved[key] = value
    if command == "single":
        resolved["n_regions"] = 1
    return resolved


def synthetic_config_from(resolved: dict) -> SyntheticConfig:
    cfg = SyntheticConfig(
        n_regions=resolved["n_regions"],
        txns_per_region=resolved["txns_per_region"],
        n_card_holders=resolved["n_card_holders"],
        n_merchants=resolved["n_merchants"],
        fraud_rate=resolved["fraud_rate"],
        fraud_time_slices=frozenset(resolved["fraud_time_slices"]),
        region_shift_strength=resolved["region_shift_strength"],
        seed=resolved["seed"],
    )
    cfg.validate()
    return cfg


def train_config_from(resolved: dict) -> TrainConfig:
    return TrainConfig(
        learning_rate=resolved["learning_rate"],
        weight_decay=resolved["weight_decay"],
        max_epochs=resolved["max_epochs"],
        patience=resolved["patience"],
        seed=resolved["seed"],
        replay_ratio=resolved["replay_ratio"],
        smoothing_lambda=resolved["smoothing_lambda"],
        smoothing_gamma=resolved["smoothing_gamma"],
        variant=resolved["variant"],
        d_hidden=resolved["d_hidden"],
        n_heads=resolved["n_heads"],
        d_semantic=resolved["d_semantic"],
        leaky_slope=resolved["leaky_slope"],
        activation=resolved["activation"],
        train_ratio=resolved["train_fraction"],
        val_ratio=resolved["val_fraction"],
        prototype_sigma_scale=resolved["prototype_sigma_scale"],
        fisher_max_samples=resolved["fisher_max_samples"],
        threshold=resolved["threshold"],
    )


def schema_mapping_from(resolved: dict) -> dict[str, str] | None:
    mapping = {
        key[len("col_") :]: value
        for key, value in resolved.items()
        if key.startswith("col_")
    }
    return mapping or None


@dataclass
class RunManifest:
    command: str
    config: dict
    inputs: list[str]
    output_dir: str
    seed: int
    version: str
    status: str = "running"
    started_at: str | None = None
    finished_at: str | None = None

    def write(self, path) -> None:
        Path(path).write_text(
            json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def now_utc() -> str:
    return datetime.now(timezone.utc).isoformat()


def load_manifest(path) -> RunManifest:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return RunManifest(**doc)
