"""Tagged-record (de)serialization for laws, process specs and run configs.

The on-disk format is JSON with one self-describing config per run.  Every
record carries a ``type`` tag; unknown keys anywhere are hard errors so a
typo cannot silently change a run.
"""
from __future__ import annotations

import json
from typing import Any

from .laws import (
    DeterministicLifetime,
    DoubleExpFlatLifetime,
    ExpFlatLifetime,
    ExponentialLifetime,
    FiniteSupportOffspring,
    HeavyTailOffspring,
    LifetimeLaw,
    LogCorrectedOffspring,
    OffspringLaw,
    TableLifetime,
    UniformLifetime,
)
from .process import (
    BackwardContagiousProcess,
    BackwardIncubationProcess,
    ClassicalProcess,
    ForwardContagiousProcess,
    ForwardIncubationProcess,
    ProcessSpec,
)

__all__ = [
    "ConfigError",
    "law_to_record",
    "law_from_record",
    "spec_to_record",
    "spec_from_record",
    "RunConfig",
    "load_config",
    "resolved_config_dict",
]


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending field."""


_OFFSPRING_FIELDS = {
    "heavy_tail_alpha": ("alpha",),
    "log_corrected_alpha": ("alpha", "beta"),
    "finite_support": ("pmf",),
}

_LIFETIME_FIELDS = {
    "exponential": ("rate",),
    "exp_flat": ("ell", "beta"),
    "double_exp_flat": ("k", "gamma"),
    "uniform": ("a", "b"),
    "deterministic": ("c",),
    "table_cdf": ("knots",),
}


def law_to_record(law) -> dict:
    if isinstance(law, HeavyTailOffspring):
        return {"type": "heavy_tail_alpha", "alpha": law.alpha}
    if isinstance(law, LogCorrectedOffspring):
        return {"type": "log_corrected_alpha", "alpha": law.alpha, "beta": law.beta}
    if isinstance(law, FiniteSupportOffspring):
        return {"type": "finite_support", "pmf": [[k, p] for k, p in law.points]}
    if isinstance(law, ExponentialLifetime):
        return {"type": "exponential", "rate": law.rate}
    if isinstance(law, ExpFlatLifetime):
        return {"type": "exp_flat", "ell": law.scale, "beta": law.power}
    if isinstance(law, DoubleExpFlatLifetime):
        return {"type": "double_exp_flat", "k": law.scale, "gamma": law.power}
    if isinstance(law, UniformLifetime):
        return {"type": "uniform", "a": law.lo, "b": law.hi}
    if isinstance(law, DeterministicLifetime):
        return {"type": "deterministic", "c": law.value}
    if isinstance(law, TableLifetime):
        return {"type": "table_cdf", "knots": [[t, f] for t, f in zip(law.ts, law.fs)]}
    raise ConfigError(f"cannot serialize law of type {type(law).__name__}")


def _require_fields(record: dict, where: str, fields: tuple[str, ...]):
    extra = set(record) - set(fields) - {"type"}
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {sorted(extra)}")
    missing = set(fields) - set(record)
    if missing:
        raise ConfigError(f"{where}: missing key(s) {sorted(missing)}")


def law_from_record(record: Any, where: str = "law"):
    if not isinstance(record, dict) or "type" not in record:
        raise ConfigError(f"{where}: expected a tagged record with a 'type' field")
    tag = record["type"]
    try:
        if tag == "heavy_tail_alpha":
            _require_fields(record, where, _OFFSPRING_FIELDS[tag])
            return HeavyTailOffspring(float(record["alpha"]))
        if tag == "log_corrected_alpha":
            _require_fields(record, where, _OFFSPRING_FIELDS[tag])
            return LogCorrectedOffspring(float(record["alpha"]), float(record["beta"]))
        if tag == "finite_support":
            _require_fields(record, where, _OFFSPRING_FIELDS[tag])
            return FiniteSupportOffspring([(int(k), float(p)) for k, p in record["pmf"]])
        if tag == "exponential":
            _require_fields(record, where, _LIFETIME_FIELDS[tag])
            return ExponentialLifetime(float(record["rate"]))
        if tag == "exp_flat":
            _require_fields(record, where, _LIFETIME_FIELDS[tag])
            return ExpFlatLifetime(float(record["ell"]), float(record["beta"]))
        if tag == "double_exp_flat":
            _require_fields(record, where, _LIFETIME_FIELDS[tag])
            return DoubleExpFlatLifetime(float(record["k"]), float(record["gamma"]))
        if tag == "uniform":
            _require_fields(record, where, _LIFETIME_FIELDS[tag])
            return UniformLifetime(float(record["a"]), float(record["b"]))
        if tag == "deterministic":
            _require_fields(record, where, _LIFETIME_FIELDS[tag])
            return DeterministicLifetime(float(record["c"]))
        if tag == "table_cdf":
            _require_fields(record, where, _LIFETIME_FIELDS[tag])
            return TableLifetime([(float(t), float(f)) for t, f in record["knots"]])
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where} ({tag}): {exc}") from exc
    raise ConfigError(f"{where}: unknown law type {tag!r}")


_SPEC_FIELDS = {
    "classical": ("offspring", "lifetime"),
    "forward_contagious": ("offspring", "lifetime", "contagious"),
    "backward_contagious": ("offspring", "lifetime", "contagious"),
    "forward_incubation": ("offspring", "lifetime", "incubation"),
    "backward_incubation": ("offspring", "lifetime", "incubation"),
}


def spec_to_record(spec: ProcessSpec) -> dict:
    base = {"offspring": law_to_record(spec.offspring), "lifetime": law_to_record(spec.lifetime)}
    if isinstance(spec, ClassicalProcess):
        return {"type": "classical", **base}
    if isinstance(spec, ForwardContagiousProcess):
        return {"type": "forward_contagious", **base, "contagious": law_to_record(spec.contagious)}
    if isinstance(spec, BackwardContagiousProcess):
        return {"type": "backward_contagious", **base, "contagious": law_to_record(spec.contagious)}
    if isinstance(spec, ForwardIncubationProcess):
        return {"type": "forward_incubation", **base, "incubation": law_to_record(spec.incubation)}
    if isinstance(spec, BackwardIncubationProcess):
        return {"type": "backward_incubation", **base, "incubation": law_to_record(spec.incubation)}
    raise ConfigError(f"cannot serialize spec of type {type(spec).__name__}")


def spec_from_record(record: Any, where: str = "process") -> ProcessSpec:
    if not isinstance(record, dict) or "type" not in record:
        raise ConfigError(f"{where}: expected a tagged record with a 'type' field")
    tag = record["type"]
    if tag not in _SPEC_FIELDS:
        raise ConfigError(f"{where}: unknown process type {tag!r}")
    _require_fields(record, where, _SPEC_FIELDS[tag])
    offspring = law_from_record(record["offspring"], f"{where}.offspring")
    if not isinstance(offspring, OffspringLaw):
        raise ConfigError(f"{where}.offspring: not an offspring law")
    lifetime = law_from_record(record["lifetime"], f"{where}.lifetime")
    if not isinstance(lifetime, LifetimeLaw):
        raise ConfigError(f"{where}.lifetime: not a lifetime law")
    if tag == "classical":
        return ClassicalProcess(offspring, lifetime)
    if tag in ("forward_contagious", "backward_contagious"):
        period = law_from_record(record["contagious"], f"{where}.contagious")
        if not isinstance(period, LifetimeLaw):
            raise ConfigError(f"{where}.contagious: not a lifetime law")
        cls = ForwardContagiousProcess if tag == "forward_contagious" else BackwardContagiousProcess
        return cls(offspring, lifetime, period)
    period = law_from_record(record["incubation"], f"{where}.incubation")
    if not isinstance(period, LifetimeLaw):
        raise ConfigError(f"{where}.incubation: not a lifetime law")
    cls = ForwardIncubationProcess if tag == "forward_incubation" else BackwardIncubationProcess
    return cls(offspring, lifetime, period)


# ---------------------------------------------------------------------------
# run configuration

_GRID_DEFAULTS = {"dt": 1e-3, "horizon": 1.0}
_SOLVER_DEFAULTS = {"tol": 1e-8, "max_iters": 10_000, "threshold": 1e-2}
_SIM_DEFAULTS = {"trials": 200, "cap": 100_000, "master_seed": 0}
_MINSUM_DEFAULTS = {"N": 60, "m0_override": None}
_OUTPUT_DEFAULTS = {"path": "report", "format": "json"}

_SECTION_DEFAULTS = {
    "grid": _GRID_DEFAULTS,
    "solver": _SOLVER_DEFAULTS,
    "sim": _SIM_DEFAULTS,
    "minsum": _MINSUM_DEFAULTS,
    "output": _OUTPUT_DEFAULTS,
}


class RunConfig:
    """Resolved configuration for one CLI run."""

    def __init__(self, process: ProcessSpec, grid: dict, solver: dict, sim: dict, minsum: dict, output: dict):
        self.process = process
        self.grid = grid
        self.solver = solver
        self.sim = sim
        self.minsum = minsum
        self.output = output

    def to_dict(self) -> dict:
        return {
            "process": spec_to_record(self.process),
            "grid": dict(self.grid),
            "solver": dict(self.solver),
            "sim": dict(self.sim),
            "minsum": dict(self.minsum),
            "output": dict(self.output),
        }


def _section(raw: dict, name: str) -> dict:
    defaults = _SECTION_DEFAULTS[name]
    given = raw.get(name, {})
    if not isinstance(given, dict):
        raise ConfigError(f"{name}: expected an object")
    extra = set(given) - set(defaults)
    if extra:
        raise ConfigError(f"{name}: unknown key(s) {sorted(extra)}")
    merged = {**defaults, **given}
    for key, val in merged.items():
        if key in ("m0_override",) and val is None:
            continue
        if key == "format":
            if val not in ("csv", "json"):
                raise ConfigError(f"{name}.format: must be 'csv' or 'json', got {val!r}")
            continue
        if key == "path":
            if not isinstance(val, str) or not val:
                raise ConfigError(f"{name}.path: must be a non-empty string")
            continue
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise ConfigError(f"{name}.{key}: expected a number, got {val!r}")
        if key in ("tol", "dt", "horizon", "threshold") and val <= 0:
            raise ConfigError(f"{name}.{key}: must be positive")
        if key in ("max_iters", "trials", "cap", "N", "m0_override") and int(val) < 1:
            raise ConfigError(f"{name}.{key}: must be a positive integer")
    return merged


def load_config(path: str, seed_override: int | None = None,
                out_override: str | None = None, format_override: str | None = None) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON (line {exc.lineno}): {exc.msg}") from exc
    return parse_config(raw, seed_override, out_override, format_override)


def parse_config(raw: Any, seed_override: int | None = None,
                 out_override: str | None = None, format_override: str | None = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected an object")
    allowed = {"process", "grid", "solver", "sim", "minsum", "output"}
    extra = set(raw) - allowed
    if extra:
        raise ConfigError(f"top level: unknown key(s) {sorted(extra)}")
    if "process" not in raw:
        raise ConfigError("top level: missing required key 'process'")
    spec = spec_from_record(raw["process"], "process")
    cfg = RunConfig(
        spec,
        _section(raw, "grid"),
        _section(raw, "solver"),
        _section(raw, "sim"),
        _section(raw, "minsum"),
        _section(raw, "output"),
    )
    if seed_override is not None:
        cfg.sim["master_seed"] = int(seed_override)
    if out_override is not None:
        cfg.output["path"] = out_override
    if format_override is not None:
        if format_override not in ("csv", "json"):
            raise ConfigError("output.format: must be 'csv' or 'json'")
        cfg.output["format"] = format_override
    return cfg


def resolved_config_dict(cfg: RunConfig) -> dict:
    """The fully resolved config embedded in every report; re-running it
    reproduces the report."""
    return cfg.to_dict()
