"""Experiment configuration: strict TOML parsing, canonical dumps, hashing."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import get_args, get_origin, get_type_hints

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMES = (
    "ce", "sd", "ls", "ls_map", "pu", "weighted_sd",
    "beta", "random_beta", "ema_self", "pruned", "dirichlet",
)


class ConfigError(ValueError):
    """Raised for any malformed configuration; the message names the key."""


def _f(default, help, **kw):
    if isinstance(default, list):
        return field(default_factory=lambda: list(default), metadata={"help": help}, **kw)
    return field(default=default, metadata={"help": help}, **kw)


@dataclass
class DatasetSpec:
    source: str = _f("synthetic", "'synthetic' (Gaussian mixture) or 'csv'")
    k: int = _f(5, "number of classes (synthetic)")
    d: int = _f(10, "feature dimension (synthetic)")
    n_train: int = _f(1000, "training samples, validation split included (synthetic)")
    n_test: int = _f(2000, "test samples (synthetic)")
    cluster_spread: float = _f(1.5, "scale of the class-mean vectors (synthetic)")
    overlap: float = _f(1.0, "within-class standard deviation (synthetic)")
    subclusters: int = _f(3, "Gaussian components per class (synthetic)")
    superclasses: int = _f(0, "groups of classes sharing a common mean offset; 0 disables (synthetic)")
    superclass_spread: float = _f(3.0, "scale of the superclass offsets (synthetic)")
    label_noise: float = _f(0.0, "fraction of training labels resampled uniformly (synthetic)")
    seed: int = _f(0, "dataset seed")
    path: str = _f("", "training CSV (csv source)")
    label_col: str = _f("label", "label column name (csv source)")
    test_path: str = _f("", "test CSV; empty means split test_fraction off `path`")
    test_fraction: float = _f(0.2, "test share when test_path is empty (csv source)")
    standardize: bool = _f(True, "z-score features with training-set mean and std")

    def validate(self):
        if self.source not in ("synthetic", "csv"):
            raise ConfigError(f"dataset.source: expected 'synthetic' or 'csv', got {self.source!r}")
        if self.source == "synthetic":
            if self.k < 2:
                raise ConfigError("dataset.k: need at least 2 classes")
            if self.d < 1:
                raise ConfigError("dataset.d: must be positive")
            if self.n_train < self.k:
                raise ConfigError("dataset.n_train: must be at least k")
            if self.n_test < 1:
                raise ConfigError("dataset.n_test: must be positive")
            if self.overlap < 0 or self.cluster_spread < 0:
                raise ConfigError("dataset.overlap/cluster_spread: must be nonnegative")
            if self.subclusters < 1:
                raise ConfigError("dataset.subclusters: must be positive")
            if self.superclasses < 0 or self.superclass_spread < 0:
                raise ConfigError("dataset.superclasses/superclass_spread: must be nonnegative")
            if not 0 <= self.label_noise < 1:
                raise ConfigError("dataset.label_noise: must lie in [0, 1)")
        elif not self.path:
            raise ConfigError("dataset.path: required for csv source")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("dataset.test_fraction: must lie in (0, 1)")


@dataclass
class ModelSpec:
    hidden: list[int] = _f([64], "hidden layer widths; [] is softmax regression")
    cross_hidden: list[int] = _f([128, 64], "second architecture for cross-distillation")

    def validate(self):
        for name in ("hidden", "cross_hidden"):
            if any((not isinstance(h, int)) or h < 1 for h in getattr(self, name)):
                raise ConfigError(f"model.{name}: widths must be positive integers")


@dataclass
class TrainSpec:
    epochs: int = _f(60, "training epochs per run")
    batch_size: int = _f(64, "minibatch size")
    learning_rate: float = _f(0.1, "base SGD learning rate")
    momentum: float = _f(0.9, "SGD momentum")
    weight_decay: float = _f(1e-4, "L2 penalty on weights (not biases)")
    lr_milestones: list[float] = _f([0.5, 0.75], "fractions of training where the rate drops")
    lr_factor: float = _f(0.1, "multiplier applied at each milestone")
    validation_fraction: float = _f(0.1, "share of the training set held out for validation")
    early_stopping: bool = _f(False, "keep the parameters with the best validation NLL")
    ema_decay: float = _f(0.99, "EMA decay of the shadow model")

    def validate(self):
        if self.epochs < 1:
            raise ConfigError("train.epochs: must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("train.batch_size: must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("train.learning_rate: must be positive")
        if not 0 <= self.momentum < 1:
            raise ConfigError("train.momentum: must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ConfigError("train.weight_decay: must be nonnegative")
        if not 0 <= self.validation_fraction < 1:
            raise ConfigError("train.validation_fraction: must lie in [0, 1)")
        if self.early_stopping and self.validation_fraction == 0:
            raise ConfigError("train.early_stopping: needs validation_fraction > 0")
        if not 0 <= self.ema_decay < 1:
            raise ConfigError("train.ema_decay: must lie in [0, 1)")
        if any(not 0 <= m <= 1 for m in self.lr_milestones):
            raise ConfigError("train.lr_milestones: fractions must lie in [0, 1]")


@dataclass
class TargetSpec:
    kind: str = _f("ce", "target scheme: " + ", ".join(SCHEMES))
    alpha: float = _f(0.0, "weight of the hard-label cross-entropy term")
    temperature: float = _f(1.0, "teacher temperature")
    beta: float = _f(1.0, "prior strength for ls_map, pu, weighted_sd and dirichlet")
    gamma: float = _f(1.0, "additive offset of the Dirichlet prior (dirichlet)")
    epsilon: float = _f(0.15, "label smoothing amount (ls)")
    keep_fraction: float = _f(0.5, "share of teacher classes kept (pruned)")
    beta_a: float = _f(0.0, "Beta(a, 1) parameter; 0 derives it from g")
    g: float = _f(0.85, "target mean effective ground-truth label (beta)")
    student_scaling: bool = _f(False, "temper the student logits too")

    def validate(self):
        if self.kind not in SCHEMES:
            raise ConfigError(f"scheme.kind: unknown scheme {self.kind!r}; expected one of {SCHEMES}")
        if not 0 <= self.alpha <= 1:
            raise ConfigError("scheme.alpha: must lie in [0, 1]")
        if self.temperature <= 0:
            raise ConfigError("scheme.temperature: must be positive")
        if self.beta < 0:
            raise ConfigError("scheme.beta: must be nonnegative")
        if not 0 <= self.epsilon < 1:
            raise ConfigError("scheme.epsilon: must lie in [0, 1)")
        if not 0 < self.keep_fraction <= 1:
            raise ConfigError("scheme.keep_fraction: must lie in (0, 1]")
        if self.beta_a < 0:
            raise ConfigError("scheme.beta_a: must be nonnegative")
        if self.kind in ("beta", "random_beta") and self.beta_a == 0 and not self.alpha < self.g < 1:
            raise ConfigError("scheme.g: must lie in (alpha, 1) to derive beta_a")


@dataclass
class ExperimentConfig:
    seed: int = _f(0, "base seed; repeat r uses seed + r")
    repeats: int = _f(1, "independent repeats")
    generations: int = _f(10, "generations for ban")
    k_nn: int = _f(3, "neighbour order of the entropy estimator")
    n_bins: int = _f(15, "ECE bins")
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    model: ModelSpec = field(default_factory=ModelSpec)
    train: TrainSpec = field(default_factory=TrainSpec)
    scheme: TargetSpec = field(default_factory=TargetSpec)

    def validate(self) -> "ExperimentConfig":
        if self.repeats < 1:
            raise ConfigError("repeats: must be >= 1")
        if self.generations < 1:
            raise ConfigError("generations: must be >= 1")
        if self.k_nn < 1:
            raise ConfigError("k_nn: must be >= 1")
        if self.n_bins < 1:
            raise ConfigError("n_bins: must be >= 1")
        for sub in (self.dataset, self.model, self.train, self.scheme):
            sub.validate()
        return self

    def replace(self, **sections) -> "ExperimentConfig":
        """Copy with top-level fields or whole sections (as dicts) overridden."""
        data = config_to_dict(self)
        for key, value in sections.items():
            if isinstance(value, dict):
                data[key] = {**data[key], **value}
            else:
                data[key] = value
        return config_from_dict(data)


def _coerce(value, annotation, key: str):
    origin = get_origin(annotation)
    if annotation is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected bool, got {type(value).__name__}")
        return value
    if annotation is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected int, got {type(value).__name__}")
        return value
    if annotation is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected float, got {type(value).__name__}")
        return float(value)
    if annotation is str:
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected string, got {type(value).__name__}")
        return value
    if annotation is list or origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{key}: expected list, got {type(value).__name__}")
        (item,) = get_args(annotation) or (None,)
        if item is None:
            return list(value)
        return [_coerce(v, item, f"{key}[{i}]") for i, v in enumerate(value)]
    raise ConfigError(f"{key}: unsupported field type {annotation}")


def _build(cls, data, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix or 'config'}: expected a table")
    hints = get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        path = ", ".join(f"{prefix}{u}" for u in unknown)
        raise ConfigError(f"unknown key(s): {path}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        key = prefix + f.name
        ann = hints[f.name]
        if dataclasses.is_dataclass(ann):
            kwargs[f.name] = _build(ann, data[f.name], key + ".")
        else:
            kwargs[f.name] = _coerce(data[f.name], ann, key)
    return cls(**kwargs)


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "").validate()


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return dataclasses.asdict(cfg)


def parse_config_text(text: str) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    return config_from_dict(data)


def parse_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config_text(p.read_text())


def dump_config(cfg: ExperimentConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


def canonical_json(cfg: ExperimentConfig) -> str:
    return json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))


def config_hash(cfg: ExperimentConfig) -> str:
    """First 16 hex digits of the SHA-256 of the canonical serialisation."""
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()[:16]


def defaults_reference() -> str:
    """Markdown page listing every key, its type and its default."""
    lines = ["# Configuration reference", "",
             "Generated from `selfdistill.config`; every key is optional.", ""]

    def section(cls, title, prefix):
        lines.extend([f"## {title}", "", "| key | type | default | meaning |",
                      "|---|---|---|---|"])
        default = cls()
        hints = get_type_hints(cls)
        nested = []
        for f in dataclasses.fields(cls):
            ann = hints[f.name]
            if dataclasses.is_dataclass(ann):
                nested.append((ann, f.name))
                continue
            value = getattr(default, f.name)
            tname = str(ann) if get_args(ann) else ann.__name__
            lines.append(f"| `{prefix}{f.name}` | {tname} | `{value!r}` | {f.metadata.get('help', '')} |")
        lines.append("")
        for ann, name in nested:
            section(ann, f"[{name}]", f"{name}.")

    section(ExperimentConfig, "top level", "")
    return "\n".join(lines)
