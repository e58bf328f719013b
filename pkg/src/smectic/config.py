"""Fail-closed JSON configuration for the experiment runner."""

from __future__ import annotations

import difflib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple

EXPERIMENTS = ("profile", "cube", "dislocation", "entropy-check", "identity-suite", "minimize")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending key path."""


# --------------------------------------------------------------------------
# value checkers: each takes (path, value) and returns the normalised value


def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


def _number(path, v, positive=False, nonneg=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        _fail(path, f"expected a finite number, got {v!r}")
    if positive and not v > 0:
        _fail(path, f"must be > 0, got {v!r}")
    if nonneg and v < 0:
        _fail(path, f"must be >= 0, got {v!r}")
    return float(v)


def positive(path, v):
    return _number(path, v, positive=True)


def real(path, v):
    return _number(path, v)


def fraction(path, v):
    v = _number(path, v)
    if not 0 < v < 0.5:
        _fail(path, f"must lie in (0, 0.5), got {v!r}")
    return v


def unit_interval(path, v):
    v = _number(path, v)
    if not 0 < v < 1:
        _fail(path, f"must lie in (0, 1), got {v!r}")
    return v


def count(minimum: int) -> Callable:
    def check(path, v):
        if isinstance(v, bool) or not isinstance(v, int):
            _fail(path, f"expected an integer, got {v!r}")
        if v < minimum:
            _fail(path, f"must be >= {minimum}, got {v}")
        return int(v)

    return check


def grid_shape(path, v):
    """A node count for a cube grid or an [nx, ny, nz] triple."""
    if isinstance(v, list):
        if len(v) != 3:
            _fail(path, f"expected three node counts, got {v!r}")
        return [count(5)(f"{path}[{i}]", c) for i, c in enumerate(v)]
    return count(5)(path, v)


def vector3(path, v):
    if not isinstance(v, list) or len(v) != 3:
        _fail(path, f"expected a list of three numbers, got {v!r}")
    return [_number(f"{path}[{i}]", c) for i, c in enumerate(v)]


def interval(path, v):
    if not isinstance(v, list) or len(v) != 2:
        _fail(path, f"expected [lo, hi], got {v!r}")
    lo, hi = (_number(f"{path}[{i}]", c) for i, c in enumerate(v))
    if not hi > lo:
        _fail(path, f"empty interval {v!r}")
    return [lo, hi]


def positive_list(path, v):
    """A positive number or a nonempty list of positive numbers."""
    if isinstance(v, list):
        if not v:
            _fail(path, "list must not be empty")
        return [positive(f"{path}[{i}]", c) for i, c in enumerate(v)]
    return [positive(path, v)]


def count_list(minimum: int) -> Callable:
    def check(path, v):
        if not isinstance(v, list) or not v:
            _fail(path, f"expected a nonempty list of integers, got {v!r}")
        return [count(minimum)(f"{path}[{i}]", c) for i, c in enumerate(v)]

    return check


def choice(*options) -> Callable:
    def check(path, v):
        if v not in options:
            _fail(path, f"must be one of {list(options)}, got {v!r}")
        return v

    return check


def sign(path, v):
    if v not in (1, -1) or isinstance(v, bool):
        _fail(path, f"must be 1 or -1, got {v!r}")
    return int(v)


def boolean(path, v):
    if not isinstance(v, bool):
        _fail(path, f"expected true or false, got {v!r}")
    return v


def path_string(path, v):
    if not isinstance(v, str):
        _fail(path, f"expected a path string, got {v!r}")
    return v


REQUIRED = object()

Schema = Dict[str, Tuple[Callable, Any]]

_COMMON: Schema = {
    "experiment": (choice(*EXPERIMENTS), None),
    "seed": (count(0), 0),
}

_JUMP: Schema = {
    "m_plus": (vector3, REQUIRED),
    "m_minus": (vector3, REQUIRED),
    "nu": (vector3, None),
    "t_max": (positive, 40.0),
    "tol": (positive, 1e-10),
}

_DESCENT: Schema = {
    "n": (grid_shape, 49),
    "max_iters": (count(0), 300),
    "step_rule": (choice("backtracking", "fixed"), "backtracking"),
    "armijo": (unit_interval, 1e-4),
    "fixed_step": (positive, 1e-6),
    "grad_tol": (positive, 1e-8),
    "slab": (fraction, 0.1),
    "blend": (fraction, 0.1),
    "frame_nodes": (count(0), 2),
    "compactness_p": (positive_list, [2.0, 4.0]),
    "save_fields": (boolean, False),
}

SCHEMAS: Dict[str, Schema] = {
    "profile": {**_JUMP, "epsilon": (positive_list, [0.5, 1.0, 2.0])},
    "cube": {
        **_JUMP,
        **_DESCENT,
        "epsilon": (positive_list, [0.2, 0.1, 0.05]),
        "init": (choice("ansatz", "affine-blend"), "ansatz"),
    },
    "minimize": {
        **_JUMP,
        **_DESCENT,
        "epsilon": (positive_list, [0.1]),
        "init": (choice("ansatz", "affine-blend", "provided"), "ansatz"),
        "initial_field": (path_string, None),
    },
    "dislocation": {
        "b": (real, 0.5),
        "epsilon": (positive_list, [0.2]),
        "sign": (sign, 1),
        "x_range": (interval, [-5.0, 5.0]),
        "z_range": (interval, [0.5, 1.5]),
        "nx": (count(3), 201),
        "nz": (count(3), 101),
        "refinements": (count(0), 2),
        "save_fields": (boolean, True),
    },
    "entropy-check": {
        "n": (count(3), 33),
        "n_theta": (count(2), 360),
        "samples": (count(1), 10000),
        "sizes": (count_list(5), [17, 33, 65]),
    },
    "identity-suite": {
        "sizes": (count_list(5), [17, 33, 65]),
        "epsilon": (positive_list, [1.0]),
    },
}


@dataclass
class ExperimentConfig:
    experiment: str
    params: Dict[str, Any]
    seed: int = 0
    source: Optional[str] = None
    extras: Dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, key):
        return self.params[key]

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "seed": self.seed, **self.params}


def _suggest(key: str, allowed) -> str:
    close = difflib.get_close_matches(key, list(allowed), n=1, cutoff=0.6)
    return f"; did you mean {close[0]!r}?" if close else ""


def validate_config(doc: Any, experiment: Optional[str] = None, source: Optional[str] = None) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("<root>: expected a JSON object")
    named = doc.get("experiment")
    if experiment is None:
        experiment = named
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment: unknown experiment {experiment!r}; choose from {list(EXPERIMENTS)}")
    if named is not None and named != experiment:
        raise ConfigError(f"experiment: config is for {named!r} but {experiment!r} was requested")
    schema = {**_COMMON, **SCHEMAS[experiment]}
    for key in doc:
        if key not in schema:
            raise ConfigError(f"{key}: unknown key for experiment {experiment!r}{_suggest(key, schema)}")
    params: Dict[str, Any] = {}
    for key, (check, default) in schema.items():
        if key in ("experiment", "seed"):
            continue
        if key in doc and doc[key] is not None:
            params[key] = check(key, doc[key])
        elif default is REQUIRED:
            raise ConfigError(f"{key}: required key is missing")
        else:
            params[key] = default
    seed = _COMMON["seed"][0]("seed", doc["seed"]) if "seed" in doc else 0
    cfg = ExperimentConfig(experiment, params, seed, source)
    _cross_checks(cfg)
    return cfg


def _cross_checks(cfg: ExperimentConfig) -> None:
    p = cfg.params
    if "slab" in p and p["slab"] + p["blend"] >= 0.5:
        raise ConfigError(f"blend: slab + blend must be < 0.5, got {p['slab'] + p['blend']!r}")
    if cfg.experiment == "minimize":
        if p["init"] == "provided":
            if p["initial_field"] is None:
                raise ConfigError("initial_field: required when init is 'provided'")
        if p["initial_field"] is not None:
            base = Path(cfg.source).parent if cfg.source else Path(".")
            f = Path(p["initial_field"])
            f = f if f.is_absolute() else base / f
            if not f.with_suffix(".json").exists() or not f.with_suffix(".bin").exists():
                raise ConfigError(f"initial_field: field dump {str(f)!r} (.bin/.json) does not exist")
            cfg.extras["initial_field_path"] = str(f)
    if cfg.experiment in ("profile", "cube", "minimize"):
        from .entropy import IncompatibleJumpError, JumpStates

        try:
            cfg.extras["jump"] = JumpStates.from_dict(p)
        except IncompatibleJumpError as exc:
            key = "nu" if exc.condition == "normal" and p.get("nu") is not None else "m_plus"
            raise ConfigError(f"{key}: incompatible jump states ({exc.condition} condition): {exc}") from None


def parse_config(path, experiment: Optional[str] = None) -> ExperimentConfig:
    """Read and validate a JSON config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"<file>: cannot read {str(path)!r}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"<file>: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return validate_config(doc, experiment, str(path))
