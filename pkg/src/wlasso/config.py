"""Flat `key = value` config files: # comments, comma-separated lists.

The experiment schema lives here so the CLI, the harness, and the round-trip
dump all agree on types and field order.
"""
from __future__ import annotations

from dataclasses import fields
from typing import Iterable

from .experiments import ExperimentConfig


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        out[key] = value.strip()
    return out


def _parse_bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _split_list(raw: str) -> list[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


_INT_FIELDS = {"p", "s", "n", "trials", "tune_trials", "master_seed", "max_iter"}
_FLOAT_FIELDS = {"q", "m_coef", "target_l1", "weight_c", "tol_kkt", "support_eps"}
_BOOL_FIELDS = {"noiseless", "allow_small_gamma"}
_INT_LIST_FIELDS = {"m_grid", "p_grid"}
_FLOAT_LIST_FIELDS = {"gamma_grid"}
_STR_LIST_FIELDS = {"estimators", "weight_kinds"}
_STR_FIELDS = {"model"}

_ALL_FIELDS = (
    _INT_FIELDS
    | _FLOAT_FIELDS
    | _BOOL_FIELDS
    | _INT_LIST_FIELDS
    | _FLOAT_LIST_FIELDS
    | _STR_LIST_FIELDS
    | _STR_FIELDS
)


def coerce_experiment_value(key: str, raw: str):
    if key in _INT_FIELDS:
        return int(raw)
    if key in _FLOAT_FIELDS:
        return float(raw)
    if key in _BOOL_FIELDS:
        return _parse_bool(raw)
    if key in _INT_LIST_FIELDS:
        return tuple(int(v) for v in _split_list(raw))
    if key in _FLOAT_LIST_FIELDS:
        return tuple(float(v) for v in _split_list(raw))
    if key in _STR_LIST_FIELDS:
        return tuple(_split_list(raw))
    if key in _STR_FIELDS:
        return raw
    raise ValueError(f"unknown config key {key!r}")


def experiment_config_from_mapping(mapping: dict[str, str]) -> ExperimentConfig:
    kwargs = {}
    for key, raw in mapping.items():
        if key not in _ALL_FIELDS:
            raise ValueError(f"unknown config key {key!r}")
        kwargs[key] = coerce_experiment_value(key, raw)
    return ExperimentConfig(**kwargs)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_experiment_config(cfg: ExperimentConfig) -> str:
    """Canonical dump; parsing it back yields an equal config."""
    lines = []
    for f in fields(cfg):
        lines.append(f"{f.name} = {_format_value(getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"


def apply_overrides(
    mapping: dict[str, str], overrides: Iterable[str]
) -> dict[str, str]:
    out = dict(mapping)
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override must look like key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out
