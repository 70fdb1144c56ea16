"""Flat key=value run configuration with a closed schema.

Files hold one ``section.key=value`` per line (# comments allowed); unknown
keys are rejected rather than silently ignored, and every command echoes
the fully resolved configuration into its output directory so a run can be
reproduced from the artifact alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable


class ConfigError(ValueError):
    """Bad key, bad value, or unreadable config file."""


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_ints(raw: str) -> tuple[int, ...]:
    return tuple(int(p) for p in raw.split(",") if p.strip())


def _parse_strs(raw: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in raw.split(",") if p.strip())


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class Field:
    parse: Callable[[str], object]
    default: object


SCHEMA: dict[str, Field] = {
    # window geometry
    "window.L": Field(int, 64),
    "window.C": Field(int, 3),
    "window.T": Field(int, 4),
    "window.tau": Field(int, 16),
    # model
    "model.hidden": Field(int, 16),
    "model.classes": Field(int, 4),
    "model.placement": Field(str, "hybrid"),
    "model.variant": Field(str, "efficientkan"),
    # explicit slot kinds win over placement/variant when non-empty
    "model.embedding": Field(str, ""),
    "model.mixer": Field(str, ""),
    "model.classifier": Field(str, ""),
    "model.mixer_depth": Field(int, 2),
    "model.use_fft": Field(_parse_bool, True),
    "model.grid_override": Field(_parse_bool, False),
    "model.grid_lo": Field(float, -1.0),
    "model.grid_hi": Field(float, 1.0),
    "model.grid_size": Field(int, 5),
    "model.grid_degree": Field(int, 3),
    # training
    "train.lr": Field(float, 0.001),
    "train.max_epochs": Field(int, 200),
    "train.patience": Field(int, 7),
    "train.batch_size": Field(int, 256),
    "train.seeds": Field(_parse_ints, (1, 2, 3, 4, 5)),
    # data
    "data.source": Field(str, "synth"),
    "data.path": Field(str, ""),
    "data.classes": Field(int, 4),
    "data.subjects": Field(int, 8),
    "data.windows_per_subject": Field(int, 60),
    "data.noise_sigma": Field(float, 0.5),
    "data.base_amplitude": Field(float, 0.35),
    "data.seed": Field(int, 7),
    "data.split_seed": Field(int, 0),
    "data.val_frac": Field(float, 0.2),
    "data.label_column": Field(str, "label"),
    "data.subject_column": Field(str, "subject"),
    "data.mixed_labels": Field(str, "strict"),
    # function fitting
    "fit.target": Field(str, "sincos"),
    "fit.model": Field(str, "kan"),
    "fit.width": Field(int, 16),
    "fit.depth": Field(int, 2),
    "fit.match_params": Field(int, 0),
    "fit.samples": Field(int, 1024),
    "fit.epochs": Field(int, 6000),
    "fit.patience": Field(int, 200),
    "fit.lr": Field(float, 0.001),
    "fit.batch_size": Field(int, 256),
    "fit.seed": Field(int, 1),
    # ablation / scaling sweeps
    "ablate.placements": Field(_parse_strs, ("M-M-M", "K-M-M", "M-K-M", "M-M-K", "hybrid")),
    "scaling.grid_sizes": Field(_parse_ints, (1, 2, 3, 4, 5, 6)),
    "scaling.hiddens": Field(_parse_ints, (8, 16, 24, 32, 40)),
}


class RunConfig:
    """Resolved configuration: schema defaults, then file, then overrides."""

    def __init__(self, values: dict[str, object]):
        self.values = values

    def __getitem__(self, key: str):
        try:
            return self.values[key]
        except KeyError:
            raise ConfigError(f"unknown config key {key!r}") from None

    def resolved_text(self) -> str:
        lines = [f"{key}={_fmt(self.values[key])}" for key in sorted(self.values)]
        return "\n".join(lines) + "\n"


def parse_config_file(path: str) -> dict[str, str]:
    raw: dict[str, str] = {}
    try:
        with open(path) as f:
            lines = f.readlines()
    except OSError as err:
        raise ConfigError(f"cannot read config file {path}: {err}") from err
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        key, sep, value = text.partition("=")
        if not sep:
            raise ConfigError(f"{path}: line {lineno}: expected key=value, got {text!r}")
        key = key.strip()
        if key not in SCHEMA:
            raise ConfigError(f"{path}: line {lineno}: unknown config key {key!r}")
        raw[key] = value.strip()
    return raw


def resolve(config_path: str | None = None, overrides: dict[str, object] | None = None) -> RunConfig:
    """Layer defaults <- config file <- overrides into a RunConfig.

    Override values may be pre-typed (from CLI flags) or raw strings.
    """
    values = {key: field.default for key, field in SCHEMA.items()}
    if config_path:
        for key, raw in parse_config_file(config_path).items():
            try:
                values[key] = SCHEMA[key].parse(raw)
            except ValueError as err:
                raise ConfigError(f"config key {key}: {err}") from err
    for key, value in (overrides or {}).items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(value, str):
            try:
                value = SCHEMA[key].parse(value)
            except ValueError as err:
                raise ConfigError(f"config key {key}: {err}") from err
        values[key] = value
    return RunConfig(values)
