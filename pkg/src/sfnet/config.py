"""Pipeline configuration: a flat key = value file with a canonical hash.

One config drives every subcommand. The canonical text rendering (all keys,
fixed order, repr'd numbers) is what gets hashed, so any consumer can verify
an artifact's ``config_hash`` by re-serializing the effective configuration
and hashing it with SHA-256.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of the pipeline, round-trippable through its file format.

    Paths are used as given (relative paths resolve against the working
    directory). ``out`` is the artifact directory shared by all stages.
    ``regions`` optionally names comma-separated node ids that represent
    non-port waypoint locations; they are ingested as ordinary nodes and
    merely flagged in the build statistics.
    """

    voyages: str = "voyages.csv"
    ports: str = "ports.csv"
    adjacency: str = "ecoregion_adjacency.csv"
    discharges: str = "discharges.csv"
    out: str = "out"
    seed: int = 0
    reference_volume: float = 500_000.0   # discharge anchoring the lambda fit
    reference_probability: float = 0.8    # introduction probability at the anchor
    mu: float = 0.02                      # per-day en-route mortality rate
    rho: float = 1.0                      # default establishment/management factor
    edge_floor: float = 1e-12
    tau: float = 0.15                     # teleportation rate for visit flows
    restarts: int = 10
    top_k: int = 10                       # ranked ports per module in reports
    top_edges: int = 20                   # ranked inter-module edges
    fraction: float = 0.2                 # node share removed in scenarios
    regions: str = ""


_FIELDS = tuple(f.name for f in fields(PipelineConfig))
_PARSERS = {f.name: type(f.default) for f in fields(PipelineConfig)}


def _parse_value(key: str, text: str):
    kind = _PARSERS[key]
    if kind is str:
        return text
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot parse {text!r} as {kind.__name__}")


def _format_value(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def validate_config(config: PipelineConfig) -> PipelineConfig:
    """Check every numeric field against its downstream precondition."""
    checks = [
        (config.reference_volume > 0, "reference_volume must be > 0"),
        (0.0 < config.reference_probability < 1.0,
         "reference_probability must lie in (0, 1)"),
        (config.mu >= 0.0, "mu must be >= 0"),
        (0.0 <= config.rho <= 1.0, "rho must lie in [0, 1]"),
        (config.edge_floor >= 0.0, "edge_floor must be >= 0"),
        (0.0 < config.tau <= 1.0, "tau must lie in (0, 1]"),
        (config.restarts >= 1, "restarts must be >= 1"),
        (config.top_k >= 1, "top_k must be >= 1"),
        (config.top_edges >= 1, "top_edges must be >= 1"),
        (0.0 < config.fraction < 1.0, "fraction must lie in (0, 1)"),
    ]
    for ok, message in checks:
        if not ok:
            raise ConfigError(message)
    for name in ("voyages", "ports", "adjacency", "discharges", "out"):
        if not getattr(config, name):
            raise ConfigError(f"{name} path must be non-empty")
    return config


def parse_config(text: str) -> PipelineConfig:
    """Parse ``key = value`` lines; blank lines and '#' comments are skipped."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key = key.strip()
        value = value.strip()
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, value)
    return validate_config(PipelineConfig(**values))


def format_config(config: PipelineConfig) -> str:
    """Canonical rendering: every field, declaration order, repr'd floats."""
    lines = [f"{name} = {_format_value(getattr(config, name))}" for name in _FIELDS]
    return "\n".join(lines) + "\n"


def load_config(path) -> PipelineConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def save_config(config: PipelineConfig, path) -> None:
    Path(path).write_text(format_config(config), encoding="utf-8")


def config_hash(config: PipelineConfig) -> str:
    """SHA-256 hex digest of the canonical rendering."""
    return hashlib.sha256(format_config(config).encode("utf-8")).hexdigest()


def apply_overrides(config: PipelineConfig, **overrides) -> PipelineConfig:
    """Replace the given fields (None values are ignored) and re-validate."""
    effective = {k: v for k, v in overrides.items() if v is not None}
    for key in effective:
        if key not in _PARSERS:
            raise ConfigError(f"unknown config field {key!r}")
    if effective:
        config = replace(config, **effective)
    return validate_config(config)
