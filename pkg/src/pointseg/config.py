"""Experiment configuration: flat INI-style files with typed sections.

Every key is schema-checked (type and name); unknown sections or keys are
rejected outright so typos fail fast instead of silently using defaults.
The only environment variable honored anywhere is PORT (service override).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields
from pathlib import Path

from .annosim import AnnotatorProfile, SceneConfig
from .budget import BudgetModel
from .model import ModelConfig, TrainConfig

_SCHEMA: dict[str, dict[str, type]] = {
    "experiment": {
        "seed": int,
        "out_dir": str,
        "supervision": str,
        "n_train": int,
        "n_test": int,
        "hybrid_full_fraction": float,
    },
    "scene": {
        "width": int,
        "height": int,
        "num_object_classes": int,
        "shapes_min": int,
        "shapes_max": int,
        "size_min": int,
        "size_max": int,
        "color_jitter": float,
        "background_noise": float,
        "core_fraction": float,
        "seed": int,
    },
    "model": {
        "features": int,
        "kernel": int,
        "stride": int,
    },
    "train": {
        "learning_rate": float,
        "bias_lr_multiplier": float,
        "momentum": float,
        "weight_decay": float,
        "batch_size": int,
        "iterations": int,
        "lambda_obj": float,
    },
    "prior": {
        "windows": int,
        "noise_sd": float,
        "seed": int,
    },
    "budget": {f.name: float if f.type == "float" else int for f in fields(BudgetModel)},
    "annotator": {
        "absent_error_rate": float,
        "point_wrong_class_rate": float,
        "point_difficult_rate": float,
        "allpoints_miss_rate": float,
        "allpoints_wrong_class_rate": float,
        "allpoints_difficult_rate": float,
        "squiggle_wrong_rate": float,
        "squiggle_difficult_rate": float,
        "click_time_spread": float,
        "annotator_id": str,
    },
}

_REQUIRED = {("experiment", "supervision"), ("experiment", "out_dir")}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    out_dir: str
    supervision: str
    n_train: int
    n_test: int
    hybrid_full_fraction: float
    scene: SceneConfig
    model_overrides: dict
    train_overrides: dict
    prior_windows: int
    prior_noise_sd: float
    prior_seed: int
    budget: BudgetModel
    profile: AnnotatorProfile

    def model_config(self, num_classes: int) -> ModelConfig:
        return ModelConfig(num_classes=num_classes, **self.model_overrides)


def _parse_value(section: str, key: str, raw: str):
    caster = _SCHEMA[section][key]
    try:
        if caster is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return caster(raw)
    except ValueError as exc:
        raise ConfigError(
            f"[{section}] {key} = {raw!r} is not a valid {caster.__name__}"
        ) from exc


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"config parse failure: {exc}") from exc

    values: dict[str, dict] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            values[section][key] = _parse_value(section, key, raw)

    for section, key in _REQUIRED:
        if key not in values.get(section, {}):
            raise ConfigError(f"missing required key {key!r} in section [{section}]")

    exp = values.get("experiment", {})
    scene = SceneConfig(**values.get("scene", {}))
    budget = BudgetModel(**values.get("budget", {}))
    profile = AnnotatorProfile(**values.get("annotator", {}))
    prior = values.get("prior", {})
    return ExperimentConfig(
        seed=exp.get("seed", 0),
        out_dir=exp["out_dir"],
        supervision=exp["supervision"],
        n_train=exp.get("n_train", 200),
        n_test=exp.get("n_test", 50),
        hybrid_full_fraction=exp.get("hybrid_full_fraction", 0.05),
        scene=scene,
        model_overrides=values.get("model", {}),
        train_overrides=values.get("train", {}),
        prior_windows=prior.get("windows", 1000),
        prior_noise_sd=prior.get("noise_sd", 0.15),
        prior_seed=prior.get("seed", 555),
        budget=budget,
        profile=profile,
    )


def train_config_from(overrides: dict, base: TrainConfig) -> TrainConfig:
    from dataclasses import replace

    return replace(base, **overrides)
