"""TOML run configuration.

A config file holds up to three tables — ``[net]``, ``[train]``, ``[data]``
— whose keys mirror the corresponding dataclass fields.  Command-line
flags always win over file values; unknown keys are rejected so typos
surface immediately.
"""

from __future__ import annotations

import dataclasses

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .nets import NetConfig
from .train import TrainConfig

SECTIONS = ("net", "train", "data")

DATA_DEFAULTS = {"count": 64, "resolution": 32, "frame_count": 16, "seed": 0}


def load_toml(path: str) -> dict:
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    unknown = set(doc) - set(SECTIONS)
    if unknown:
        raise ValueError(f"unknown config sections {sorted(unknown)}; expected {SECTIONS}")
    return doc


def _known_fields(cls) -> set:
    return {f.name for f in dataclasses.fields(cls)}


def _checked(section: dict, cls, name: str) -> dict:
    unknown = set(section) - _known_fields(cls)
    if unknown:
        raise ValueError(f"unknown keys {sorted(unknown)} in [{name}]")
    return dict(section)


def net_config(doc: dict, **overrides) -> NetConfig:
    merged = _checked(doc.get("net", {}), NetConfig, "net")
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return NetConfig.from_dict(merged)


def train_config(doc: dict, **overrides) -> TrainConfig:
    merged = _checked(doc.get("train", {}), TrainConfig, "train")
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig.from_dict(merged)


def data_config(doc: dict, **overrides) -> dict:
    section = dict(doc.get("data", {}))
    unknown = set(section) - set(DATA_DEFAULTS)
    if unknown:
        raise ValueError(f"unknown keys {sorted(unknown)} in [data]")
    merged = {**DATA_DEFAULTS, **section}
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return merged
