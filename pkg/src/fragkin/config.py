"""JSON run configurations for the ``simulate`` and ``mc`` commands."""
from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError
from .grid import GammaLike, NarrowBump, Table
from .kernel import kernel_from_dict
from .mc import McConfig
from .pde import SimulationConfig

_NUMBER = {"type": "number"}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}

KERNEL_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "properties": {
                "type": {"const": "power_law"},
                "alpha": {"type": "number", "minimum": 0},
                "C": {"type": "number", "minimum": 0},
            },
            "required": ["type", "alpha", "C"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "type": {"const": "tabulated"},
                "nodes": {"type": "array", "items": _NUMBER, "minItems": 2},
                "values": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 2},
            },
            "required": ["type", "nodes", "values"],
            "additionalProperties": False,
        },
    ]
}

_RANGE = {
    "type": "array",
    "prefixItems": [_NUMBER, _NUMBER, {"type": "integer", "minimum": 1}],
    "minItems": 3,
    "maxItems": 3,
}
TIMES_SCHEMA = {
    "oneOf": [
        {"type": "array", "items": {"type": "number", "minimum": 0}},
        {
            "type": "object",
            "properties": {"linspace": _RANGE, "geomspace": _RANGE, "include_zero": {"type": "boolean"}},
            "minProperties": 1,
            "additionalProperties": False,
        },
    ]
}

SIMULATE_SCHEMA = {
    "type": "object",
    "properties": {
        "kernel": KERNEL_SCHEMA,
        "grid": {
            "type": "object",
            "properties": {"r_min": _POSITIVE, "r_max": _POSITIVE, "n": {"type": "integer", "minimum": 8}},
            "additionalProperties": False,
        },
        "initial": {
            "type": "object",
            "properties": {
                "type": {"enum": ["narrow_bump", "gamma_like", "table"]},
                "r0": _POSITIVE,
                "w": _POSITIVE,
                "alpha": {"type": "number", "minimum": 0},
                "points": {"type": "array", "items": {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2}},
            },
            "required": ["type"],
            "additionalProperties": False,
        },
        "V": _POSITIVE,
        "t_end": {"type": "number", "minimum": 0},
        "sample_times": TIMES_SCHEMA,
        "safety": _POSITIVE,
        "clip": {"type": "boolean"},
        "conservative": {"type": "boolean"},
        "snapshots": {"type": "boolean"},
    },
    "required": ["kernel", "t_end"],
    "additionalProperties": False,
}

MC_SCHEMA = {
    "type": "object",
    "properties": {
        "kernel": KERNEL_SCHEMA,
        "initial": {
            "oneOf": [
                {
                    "type": "object",
                    "properties": {"count": {"type": "integer", "minimum": 1}, "size": _POSITIVE},
                    "required": ["count", "size"],
                    "additionalProperties": False,
                },
                {
                    "type": "object",
                    "properties": {"sizes": {"type": "array", "items": _POSITIVE, "minItems": 1}},
                    "required": ["sizes"],
                    "additionalProperties": False,
                },
            ]
        },
        "t_end": {"type": "number", "minimum": 0},
        "sample_times": TIMES_SCHEMA,
        "cap": {"type": "integer", "minimum": 100},
        "r_floor": _POSITIVE,
        "replicas": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "method": {"enum": ["batched", "direct"]},
        "workers": {"type": "integer", "minimum": 1},
        "histogram": TIMES_SCHEMA,
    },
    "required": ["kernel", "initial", "t_end"],
    "additionalProperties": False,
}


def load_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def validate(doc: dict, schema: dict) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "config" + "".join(
            f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path
        )
        raise ConfigError(f"{where}: {err.message}")


def expand_times(spec, t_end: float | None = None) -> np.ndarray:
    """Expand ``[..]``, ``{"linspace": [a, b, n]}`` or ``{"geomspace": [a, b, n]}``."""
    if isinstance(spec, list):
        return np.asarray(spec, dtype=float)
    if "linspace" in spec:
        a, b, n = spec["linspace"]
        times = np.linspace(a, b, n)
    elif "geomspace" in spec:
        a, b, n = spec["geomspace"]
        if a <= 0 or b <= 0:
            raise ConfigError("geomspace bounds must be > 0")
        times = np.geomspace(a, b, n)
        times[-1] = b
    else:
        raise ConfigError("time spec needs 'linspace' or 'geomspace'")
    if spec.get("include_zero"):
        times = np.concatenate(([0.0], times[times > 0]))
    if t_end is not None:
        times = np.minimum(times, t_end)
    return times


def _initial(spec: dict | None):
    if spec is None:
        return NarrowBump()
    kind = spec["type"]
    if kind == "narrow_bump":
        return NarrowBump(r0=spec.get("r0", 1.0), w=spec.get("w", 0.02))
    if kind == "gamma_like":
        return GammaLike(alpha=spec.get("alpha", 1.0))
    if "points" not in spec:
        raise ConfigError("config.initial: table needs 'points'")
    return Table(points=tuple(tuple(p) for p in spec["points"]))


def simulation_config(doc: dict) -> SimulationConfig:
    validate(doc, SIMULATE_SCHEMA)
    grid = doc.get("grid", {})
    t_end = float(doc["t_end"])
    times = doc.get("sample_times")
    return SimulationConfig(
        kernel=kernel_from_dict(doc["kernel"]),
        r_min=grid.get("r_min", 1e-3),
        r_max=grid.get("r_max", 10.0),
        n_nodes=grid.get("n", 512),
        initial=_initial(doc.get("initial")),
        V_target=doc.get("V", 1.0),
        t_end=t_end,
        sample_times=None if times is None else expand_times(times, t_end).tolist(),
        safety=doc.get("safety", 0.1),
        clip=doc.get("clip", True),
        conservative=doc.get("conservative", True),
        snapshots=doc.get("snapshots", True),
    )


def mc_config(doc: dict, seed: int | None = None, replicas: int | None = None) -> McConfig:
    validate(doc, MC_SCHEMA)
    init = doc["initial"]
    sizes = init["sizes"] if "sizes" in init else np.full(init["count"], float(init["size"]))
    t_end = float(doc["t_end"])
    times = doc.get("sample_times")
    hist = doc.get("histogram")
    return McConfig(
        kernel=kernel_from_dict(doc["kernel"]),
        initial_sizes=sizes,
        t_end=t_end,
        sample_times=None if times is None else expand_times(times, t_end),
        cap=doc.get("cap", 1_000_000),
        r_floor=doc.get("r_floor", 1e-6),
        replicas=doc.get("replicas", 1) if replicas is None else replicas,
        seed=doc.get("seed", 0) if seed is None else seed,
        method=doc.get("method", "batched"),
        hist_edges=None if hist is None else expand_times(hist),
        workers=doc.get("workers", 1),
    )
