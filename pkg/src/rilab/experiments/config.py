"""Experiment configuration: JSON file, schema validation, flag overrides."""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import jsonschema

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "dim": {"type": "integer", "minimum": 3},
        "u": {"oneOf": [{"type": "number", "minimum": 0},
                        {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1}]},
        "L0": {"type": "integer", "minimum": 1},
        "depth": {"type": "integer", "minimum": 0},
        "reps": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "trunc_radius": {"type": ["integer", "null"], "minimum": 1},
        "source_factor": {"type": "integer", "minimum": 4},
        "green_table": {"type": ["string", "null"]},
        "solver_cap": {"type": "integer", "minimum": 1},
        "max_window_sites": {"type": "integer", "minimum": 1},
        "harmonic_hits": {"type": "integer", "minimum": 100},
        "experiments": {"type": "array", "items": {"type": "string"}},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number"}},
        "out_dir": {"type": "string"},
    },
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    dim: int = 3
    u: float | tuple[float, ...] = 1.0
    L0: int = 1
    depth: int = 1
    reps: int = 1000
    seed: int = 0
    trunc_radius: int | None = None
    source_factor: int = 8
    green_table: str | None = None
    solver_cap: int = 5000
    max_window_sites: int = 5_000_000
    harmonic_hits: int = 200_000
    experiments: tuple[str, ...] = ("acceptance",)
    tolerances: dict = field(default_factory=dict)
    out_dir: str = "results"

    def __post_init__(self):
        if isinstance(self.u, list):
            object.__setattr__(self, "u", tuple(self.u))
        if isinstance(self.experiments, list):
            object.__setattr__(self, "experiments", tuple(self.experiments))
        try:
            jsonschema.validate(self.to_dict(), SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(exc.message) from exc
        if self.green_table is not None and not Path(self.green_table).is_file():
            raise ConfigError(f"green table {self.green_table!r} does not exist")

    @property
    def u_values(self) -> tuple[float, ...]:
        return self.u if isinstance(self.u, tuple) else (float(self.u),)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["u"] = list(self.u) if isinstance(self.u, tuple) else self.u
        out["experiments"] = list(self.experiments)
        return out

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def load_green(self):
        from ..green import GreenTable, reference_table
        if self.green_table is None:
            return reference_table(self.dim)
        table = GreenTable.load(self.green_table)
        if table.dim != self.dim:
            raise ConfigError(f"green table is for d={table.dim}, config has d={self.dim}")
        return table


def load_config(path: str | os.PathLike | None = None, **overrides) -> ExperimentConfig:
    data = {}
    if path is not None:
        with open(path) as fh:
            data = json.load(fh)
        try:
            jsonschema.validate(data, SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(exc.message) from exc
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**data)


def worker_count() -> int:
    cap = os.environ.get("INTERLACE_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError as exc:
            raise ConfigError("INTERLACE_THREADS must be an integer") from exc
    return n
