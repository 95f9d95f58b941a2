"""Run configuration: flat key=value files, each key shadowed by a CLI flag.

Defaults are the desk profile: widths 32/64/64/64, vocabulary 50, corpora
5000/500/500, batch 80, Adam at 1e-3, beam 5. Unknown keys are rejected
rather than ignored so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import ConfigError

_TASKS = ("copy", "reversal", "agreement")
_PRECISIONS = ("float32", "float64")


@dataclass
class RunConfig:
    task: str = "agreement"
    train_size: int = 5000
    dev_size: int = 500
    test_size: int = 500
    min_len: int = 4
    max_len: int = 8
    vocab_size: int = 50
    d: int = 32
    n: int = 64
    a: int = 64
    r: int = 64
    batch_size: int = 80
    learning_rate: float = 1e-3
    beam_width: int = 5
    steps_stage1: int = 2500
    steps_stage2: int = 2500
    seed: int = 1
    precision: str = "float32"
    clip_norm: float = 0.0
    out_dir: str = "run"

    @property
    def dtype(self):
        return np.float64 if self.precision == "float64" else np.float32

    def validate(self) -> "RunConfig":
        if self.task not in _TASKS:
            raise ConfigError(f"task must be one of {', '.join(_TASKS)}; got {self.task!r}")
        if self.precision not in _PRECISIONS:
            raise ConfigError(f"precision must be float32 or float64; got {self.precision!r}")
        for key in ("train_size", "dev_size", "test_size", "min_len", "vocab_size",
                    "d", "n", "a", "r", "batch_size", "beam_width"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be >= 1, got {getattr(self, key)}")
        if self.max_len < self.min_len:
            raise ConfigError(f"max_len {self.max_len} below min_len {self.min_len}")
        for key in ("steps_stage1", "steps_stage2"):
            if getattr(self, key) < 0:
                raise ConfigError(f"{key} must be >= 0, got {getattr(self, key)}")
        if self.clip_norm < 0:
            raise ConfigError(f"clip_norm must be >= 0, got {self.clip_norm}")
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        return self


def config_field_names() -> list:
    return [f.name for f in fields(RunConfig)]


def _coerce(name: str, kind, raw: str):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{name} expects {kind.__name__}, got {raw!r}") from None


def read_config_file(path) -> dict:
    """Parse key=value lines; blank lines and # comments are skipped."""
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        values[key.strip()] = raw.strip()
    return values


def build_config(file_path=None, overrides: dict | None = None) -> RunConfig:
    """File values first, then overrides; every key must name a config field."""
    types = {f.name: f.type for f in fields(RunConfig)}
    kinds = {"task": str, "precision": str, "out_dir": str,
             "learning_rate": float, "clip_norm": float}
    merged = {}
    for source in (read_config_file(file_path) if file_path else {}, overrides or {}):
        for key, raw in source.items():
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            kind = kinds.get(key, int)
            merged[key] = _coerce(key, kind, raw) if isinstance(raw, str) else raw
    return RunConfig(**merged).validate()
