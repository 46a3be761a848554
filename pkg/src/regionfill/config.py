"""YAML run configuration: versioned schema, strict keys, dotted overrides.

The document mirrors TrainConfig field-for-field under a `train:` section.
Unknown keys are rejected with a closest-match suggestion so typos fail fast
instead of silently training with defaults.
"""

from __future__ import annotations

import difflib
from dataclasses import fields as dc_fields
from pathlib import Path

import yaml

from regionfill.losses import LossWeights
from regionfill.masks import MaskConfig
from regionfill.nn import DiscriminatorConfig, GeneratorConfig
from regionfill.training import TrainConfig

SCHEMA_VERSION = 1

_NESTED = {
    "weights": LossWeights,
    "generator": GeneratorConfig,
    "discriminator": DiscriminatorConfig,
    "mask": MaskConfig,
}

_TUPLE_FIELDS = {"betas", "ratio_range", "stroke_count", "stroke_width", "vertex_count"}


class ConfigError(ValueError):
    """Malformed config document, unknown key, or invalid value."""


def _build_dataclass(cls, doc: dict, prefix: str):
    known = {f.name for f in dc_fields(cls)}
    kwargs = {}
    for key, value in doc.items():
        if key not in known:
            hint = difflib.get_close_matches(key, sorted(known), n=1)
            suffix = f", did you mean '{prefix}{hint[0]}'?" if hint else ""
            raise ConfigError(f"unknown config key '{prefix}{key}'{suffix}")
        if key in _NESTED and isinstance(value, dict):
            kwargs[key] = _build_dataclass(_NESTED[key], value, f"{prefix}{key}.")
        elif key in _TUPLE_FIELDS and isinstance(value, list):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value under {prefix or 'config'}: {exc}") from exc


def build_train_config(doc: dict) -> TrainConfig:
    """Validate a full config document and produce the TrainConfig."""
    if not isinstance(doc, dict):
        raise ConfigError(f"config root must be a mapping, got {type(doc).__name__}")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version must be {SCHEMA_VERSION}, got {version!r}"
        )
    allowed = {"schema_version", "train"}
    for key in doc:
        if key not in allowed:
            hint = difflib.get_close_matches(key, sorted(allowed), n=1)
            suffix = f", did you mean {hint[0]!r}?" if hint else ""
            raise ConfigError(f"unknown config key {key!r}{suffix}")
    return _build_dataclass(TrainConfig, doc.get("train", {}), "train.")


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(f"config root in {path} must be a mapping")
    return doc


def apply_override(doc: dict, assignment: str) -> dict:
    """Apply one `dotted.key=value` override in place; value parsed as YAML."""
    if "=" not in assignment:
        raise ConfigError(f"override must look like key.path=value, got {assignment!r}")
    dotted, raw = assignment.split("=", 1)
    keys = dotted.strip().split(".")
    if not all(keys):
        raise ConfigError(f"bad override key {dotted!r}")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse override value {raw!r}: {exc}") from exc
    if isinstance(value, str):
        # YAML 1.1 reads exponent forms without a dot ("5e-4") as strings.
        try:
            value = int(value)
        except ValueError:
            try:
                value = float(value)
            except ValueError:
                pass
    node = doc
    for k in keys[:-1]:
        nxt = node.setdefault(k, {})
        if not isinstance(nxt, dict):
            raise ConfigError(f"override path {dotted!r} crosses non-mapping key {k!r}")
        node = nxt
    node[keys[-1]] = value
    return doc


def config_to_document(cfg: TrainConfig) -> dict:
    from dataclasses import asdict

    def tuples_to_lists(obj):
        if isinstance(obj, dict):
            return {k: tuples_to_lists(v) for k, v in obj.items()}
        if isinstance(obj, tuple):
            return list(obj)
        return obj

    return {"schema_version": SCHEMA_VERSION, "train": tuples_to_lists(asdict(cfg))}


def dump_config(cfg: TrainConfig) -> str:
    return yaml.safe_dump(config_to_document(cfg), sort_keys=False)


# Named presets: the desk-scale default plus the full-scale recipe
# (256x256, 20 warm-up + 9 adversarial epochs, lr 1e-4, VGG features).
PRESETS: dict[str, dict] = {
    "desk64": {},
    "full256": {
        "image_size": 256,
        "batch_size": 8,
        "epochs": 29,
        "pretrain_epochs": 20,
        "lr": 1e-4,
        "backbone": "vgg16",
        "generator": {"base_width": 64, "levels": 4},
        "discriminator": {"levels": 5, "base_width": 64},
    },
}


def preset_config(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}, available: {sorted(PRESETS)}")
    return {"schema_version": SCHEMA_VERSION, "train": dict(PRESETS[name])}
