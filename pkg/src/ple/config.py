"""One declarative config (TOML or JSON) for every stage, with flag overrides."""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError, InputFileError
from .features import FeatureConfig
from .inference import InferenceConfig
from .trainer import TrainingConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SECTIONS = {"features": FeatureConfig, "training": TrainingConfig, "inference": InferenceConfig}
CONFIG_FILE = "config.json"


@dataclass(frozen=True)
class PipelineConfig:
    features: FeatureConfig = field(default_factory=FeatureConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    inference: InferenceConfig = field(default_factory=InferenceConfig)

    def to_dict(self) -> dict:
        out = {}
        for name in SECTIONS:
            sec = asdict(getattr(self, name))
            out[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in sec.items()}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        unknown = set(data) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        parts = {}
        for name, kind in SECTIONS.items():
            section = data.get(name, {})
            if not isinstance(section, dict):
                raise ConfigError(f"config section [{name}] must be a table")
            parts[name] = _build(kind, section, name)
        return cls(**parts)

    def override(self, section: str, **values) -> "PipelineConfig":
        values = {k: v for k, v in values.items() if v is not None}
        if not values:
            return self
        merged = {**asdict(getattr(self, section)), **values}
        return replace(self, **{section: _build(SECTIONS[section], merged, section)})


def _build(kind, values: dict, section: str):
    names = {f.name for f in fields(kind) if f.init}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    values = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
    try:
        return kind(**values)
    except TypeError as exc:
        raise ConfigError(f"[{section}]: {exc}") from exc


def load_config(path) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    path = Path(path)
    if not path.is_file():
        raise InputFileError(f"no such file: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text) if path.suffix == ".json" else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: cannot parse config ({exc})") from exc
    return PipelineConfig.from_dict(data)


def write_config(config: PipelineConfig, out_dir) -> Path:
    out = Path(out_dir) / CONFIG_FILE
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out
