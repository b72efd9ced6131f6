"""Run configuration: flat key=value files with command-line overrides."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

__all__ = ["ConfigError", "RunConfig", "parse_config_text", "load_config"]


class ConfigError(ValueError):
    """Invalid, missing or unknown configuration values."""


PROBLEMS = ("manufactured", "zero", "cavity")


@dataclass(frozen=True)
class RunConfig:
    dim: int = 2
    N: int | None = None
    k: int = 2
    tau: float = 0.01
    T: float = 1.0
    problem: str = "manufactured"
    Re: float = 100.0
    Rem: float = 100.0
    Ha: float = math.sqrt(10.0)
    eps_subiter: float = 1e-10
    cg_tol: float = 1e-12
    out_dir: str = "out"

    def validate(self, require_N: bool = True) -> "RunConfig":
        if self.dim not in (2, 3):
            raise ConfigError(f"dim must be 2 or 3, got {self.dim}")
        if self.N is None:
            if require_N:
                raise ConfigError("missing required value: --N")
        elif self.N < 4:
            raise ConfigError(f"N must be >= 4, got {self.N}")
        if not 1 <= self.k <= 6:
            raise ConfigError(f"k must be in 1..6, got {self.k}")
        if not self.tau > 0:
            raise ConfigError(f"tau must be > 0, got {self.tau}")
        if not self.T >= self.tau:
            raise ConfigError(f"T must be >= tau, got T={self.T}, tau={self.tau}")
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {', '.join(PROBLEMS)}, got {self.problem!r}")
        for name in ("Re", "Rem", "Ha", "eps_subiter", "cg_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        return self

    def updated(self, **values) -> "RunConfig":
        return replace(self, **coerce(values))

    def as_dict(self) -> dict:
        return asdict(self)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw):
    kind = _TYPES[key]
    if raw is None or not isinstance(raw, str):
        return raw
    try:
        if "int" in kind:
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        if "float" in kind:
            return float(raw)
    except ValueError:
        raise ConfigError(f"invalid value for {key}: {raw!r}") from None
    return raw


def coerce(values: dict) -> dict:
    out = {}
    for key, raw in values.items():
        if key not in _TYPES:
            raise ConfigError(f"unknown config key: {key}")
        out[key] = _convert(key, raw)
    return out


def parse_config_text(text: str) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown config key: {key}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key}")
        values[key] = value
    return coerce(values)


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the file, then ``overrides`` (entries that are None are skipped)."""
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
        values.update(parse_config_text(text))
    if overrides:
        values.update(coerce({k: v for k, v in overrides.items() if v is not None}))
    return RunConfig(**values)
