"""Experiment configuration: versioned JSON schema plus CLI overrides."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

SCHEMA_VERSION = 1

COMMANDS = ("quantile-map", "local-quantile-map", "robustness", "breakdown",
            "indep-power")

_MISSING = object()


@dataclass
class ExperimentConfig:
    """A parsed experiment description.

    ``raw`` holds the effective configuration dictionary (file contents with
    CLI overrides applied); artifact headers embed it verbatim so reruns are
    reproducible from the artifact alone.
    """

    command: str
    seed: int
    out: Path
    raw: dict = field(default_factory=dict)
    threads: int = 1
    dump_matrices: bool = False

    @staticmethod
    def from_file(path, command: str | None = None, seed: int | None = None,
                  out: str | None = None, threads: int | None = None,
                  dump_matrices: bool = False) -> "ExperimentConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        version = raw.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ConfigError(
                f"unsupported schema_version {version!r}; this build expects {SCHEMA_VERSION}")
        if seed is not None:
            raw["seed"] = int(seed)
        if out is not None:
            raw["out"] = str(out)
        if command is not None:
            raw.setdefault("command", command)
            if raw["command"] != command:
                raise ConfigError(
                    f"config names command {raw['command']!r} but {command!r} was invoked")
        cmd = raw.get("command")
        if cmd not in COMMANDS:
            raise ConfigError(f"unknown command {cmd!r}; known: {COMMANDS}")
        if "seed" not in raw:
            raise ConfigError("a seed is required (config 'seed' or --seed)")
        seed_val = int(raw["seed"])
        if not 0 <= seed_val < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed_val}")
        if "out" not in raw:
            raise ConfigError("an output directory is required (config 'out' or --out)")
        out_dir = Path(raw["out"])
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"output directory {out_dir} is not writable: {exc}") from None
        return ExperimentConfig(command=cmd, seed=seed_val, out=out_dir, raw=raw,
                                threads=int(threads) if threads else 1,
                                dump_matrices=bool(dump_matrices))

    def require(self, key: str):
        value = self.raw.get(key, _MISSING)
        if value is _MISSING:
            raise ConfigError(f"config for {self.command!r} is missing required key {key!r}")
        return value

    def get(self, key: str, default=None):
        return self.raw.get(key, default)

    def positive_int(self, key: str, default: int | None = None) -> int:
        value = self.raw.get(key, default)
        if value is None:
            raise ConfigError(f"config for {self.command!r} is missing required key {key!r}")
        value = int(value)
        if value < 1:
            raise ConfigError(f"{key} must be >= 1, got {value}")
        return value
