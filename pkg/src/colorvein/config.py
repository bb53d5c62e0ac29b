"""Run configuration: INI file + CLI flag overrides, validated and hashable."""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
from pathlib import Path


class ConfigError(ValueError):
    """Invalid or unresolvable configuration."""


@dataclasses.dataclass
class RunConfig:
    # paths
    store: str = "store.jsonl"
    vault: str = "vault.jsonl"
    manifest: str = ""
    checkpoint: str = "model.npz"
    out: str = "out"
    # pipeline params
    m: int = 10
    margin: float = 1.5
    lambda1: float = 1.0
    lambda2: float = 0.5
    lambda3: float = 2.0
    delta: float = 1.0
    lam_hint: float = 100.0
    lam_tone: float = 0.1
    sigma: float = 0.1
    # training
    epochs: int = 200
    batch_size: int = 8
    lr: float = 0.001
    weight_decay: float = 0.0001
    # protocol
    scenario: str = "normal"
    seed: int = 0
    n_attack: int = 10000
    threshold: float = 0.5
    # synthetic corpus
    n_enrolled: int = 30
    n_stolen: int = 10
    n_samples: int = 8
    dims: int = 64

    def validate(self) -> None:
        if self.m < 1:
            raise ConfigError("m must be >= 1")
        if self.margin <= 0:
            raise ConfigError("margin must be positive")
        if min(self.lambda1, self.lambda2, self.lambda3) < 0:
            raise ConfigError("lambda weights must be nonnegative")
        if self.delta <= 0 or self.lam_hint <= 0 or self.sigma <= 0:
            raise ConfigError("delta, lam_hint and sigma must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")
        if self.lr < 0:
            raise ConfigError("lr must be nonnegative")
        if self.n_attack < 1:
            raise ConfigError("n_attack must be >= 1")
        if self.dims < 64:
            raise ConfigError("dims must be >= 64")
        if not -1.0 <= self.threshold <= 1.0 + 1e-9:
            raise ConfigError("threshold must lie in [-1, 1]")

    @property
    def lambdas(self) -> tuple[float, float, float]:
        return (self.lambda1, self.lambda2, self.lambda3)

    def config_hash(self) -> str:
        lines = [
            f"{field.name}={getattr(self, field.name)!r}"
            for field in dataclasses.fields(self)
        ]
        return hashlib.sha256("\n".join(sorted(lines)).encode()).hexdigest()[:16]


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from an INI file (flat keys, any or no section)
    with CLI overrides applied on top."""
    config = RunConfig()
    field_types = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser()
        try:
            text = path.read_text()
            parser.read_string(
                text if text.lstrip().startswith("[") else "[run]\n" + text
            )
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
        for section in parser.sections():
            for key, value in parser.items(section):
                _apply(config, field_types, key, value)
    for key, value in (overrides or {}).items():
        if value is not None:
            _apply(config, field_types, key, value)
    config.validate()
    return config


def _apply(config: RunConfig, field_types: dict, key: str, value) -> None:
    if key not in field_types:
        raise ConfigError(f"unknown config key {key!r}")
    kind = field_types[key]
    try:
        if kind in ("int", int):
            value = int(value)
        elif kind in ("float", float):
            value = float(value)
        else:
            value = str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {value!r}") from exc
    setattr(config, key, value)
