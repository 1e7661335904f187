"""JSON study configuration: schema, presets and model construction.

A study config is a JSON object; see ``STUDY_SCHEMA`` and the README for
the fields.  Sub-objects ``q``, ``semigroup``, ``vol`` and ``drift`` carry
a ``kind`` tag and are validated against the schema for that kind, so
unknown keys are rejected with the offending path in the message.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass

import jsonschema
import numpy as np

from .noise import SpectralQ
from .semigroup import IdentitySemigroup, MatrixExpSemigroup, Semigroup, ShiftSemigroup, random_generator
from .spaces import FilipovicSpace
from .volmodels import BnsOu, ConstantVol, RoughExp, mode_volatility, smooth_kernel_volatility


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int_pos = {"type": "integer", "minimum": 1}
_matrix = {"type": "array", "items": {"type": "array", "items": _num}}


def _obj(props: dict, required=()) -> dict:
    return {
        "type": "object",
        "properties": {"kind": {"type": "string"}, **props},
        "required": ["kind", *required],
        "additionalProperties": False,
    }


KIND_SCHEMAS = {
    "q": {
        "geometric": _obj({"ratio": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}, "first": _pos, "rank": _int_pos}),
        "explicit": _obj({"eigenvalues": {"type": "array", "items": _pos, "minItems": 1}}, ["eigenvalues"]),
        "unit": _obj({}),
    },
    "semigroup": {
        "identity": _obj({}),
        "matrix_exp": _obj({"op_norm": {"type": "number", "minimum": 0}, "generator_seed": {"type": "integer"}, "generator": _matrix}),
        "shift": _obj({"beta": _pos, "x_max": _pos, "m": {"type": "integer", "minimum": 2}}),
    },
    "vol": {
        "constant": _obj({"scale": _num, "matrix": _matrix}),
        "filipovic_kernel": _obj({"c": _num, "f_scale": _num, "amplitude": _num, "width": _pos}),
        "modes": _obj({"modes": _int_pos, "amplitude": _num}),
        "bns": _obj({"rate": {"type": "number", "minimum": 0}, "jump_scale": _pos, "kappa": {"type": "number", "minimum": 0}, "sigma0_scale": {"type": "number", "minimum": 0}}),
        "rough_exp": _obj({"hurst": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}, "amplitudes": {"type": "array", "items": _num}}),
    },
    "drift": {
        "none": _obj({}),
        "hjm": _obj({}),
        "constant": _obj({"vector": {"type": "array", "items": _num}}, ["vector"]),
    },
}

STUDY_SCHEMA = {
    "type": "object",
    "properties": {
        "dimension": _int_pos,
        "q": {"type": "object"},
        "semigroup": {"type": "object"},
        "vol": {"type": "object"},
        "drift": {"type": "object"},
        "T": _pos,
        "n_list": {"type": "array", "items": _int_pos, "minItems": 1},
        "replications": {"type": "integer", "minimum": 2},
        "refine": _int_pos,
        "seed": {"type": "integer", "minimum": 0},
        "holder_alpha": _pos,
        "subgrid": {"type": "integer", "minimum": 2},
        "bn_paths": _int_pos,
        "slope_band": {"oneOf": [{"type": "null"}, {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}]},
        "bn_slope_min": {"oneOf": [{"type": "null"}, _num]},
        "delta_list": {"type": "array", "items": _pos, "minItems": 1},
    },
    "additionalProperties": False,
}

DEFAULTS = {
    "dimension": 10,
    "q": {"kind": "geometric", "ratio": 0.5, "first": 1.0},
    "semigroup": {"kind": "identity"},
    "vol": {"kind": "constant", "scale": 1.0},
    "drift": {"kind": "none"},
    "T": 1.0,
    "n_list": [16, 32, 64, 128, 256, 512, 1024],
    "replications": 200,
    "refine": 8,
    "seed": 20240611,
    "holder_alpha": 0.5,
    "subgrid": 16,
    "bn_paths": 4,
    "slope_band": None,
    "bn_slope_min": None,
    "delta_list": [2.0 ** -k for k in range(4, 11)],
}

PRESETS = {
    "martingale": {"slope_band": [0.4, 0.6]},
    "uniform": {
        "semigroup": {"kind": "matrix_exp", "op_norm": 1.0, "generator_seed": 1},
        "slope_band": [0.4, 1.5],
    },
    "shift": {
        "semigroup": {"kind": "shift", "beta": 0.5, "x_max": 5.0, "m": 64},
        "q": {"kind": "unit"},
        "vol": {"kind": "filipovic_kernel", "c": 0.5, "f_scale": 0.5, "amplitude": 1.0, "width": 0.5},
        "n_list": [16, 32, 64, 128, 256],
        "replications": 40,
        "refine": 4,
        "bn_slope_min": 1.8,
    },
    "hjm": {
        "semigroup": {"kind": "shift", "beta": 0.5, "x_max": 5.0, "m": 64},
        "q": {"kind": "geometric", "ratio": 0.5, "first": 1.0},
        "vol": {"kind": "modes", "modes": 4, "amplitude": 1.0},
        "drift": {"kind": "hjm"},
        "n_list": [16, 32, 64, 128, 256],
        "replications": 40,
        "refine": 4,
    },
    "bns": {
        "dimension": 3,
        "vol": {"kind": "bns", "rate": 2.0, "jump_scale": 0.5, "kappa": 1.0, "sigma0_scale": 1.0},
        "n_list": [16, 32, 64, 128],
        "replications": 50,
    },
}


def _format_error(err: jsonschema.ValidationError, prefix: str) -> str:
    path = ".".join(str(p) for p in err.absolute_path)
    where = f"{prefix}.{path}" if path else prefix
    return f"{where}: {err.message}"


def _validate(instance, schema, prefix: str):
    errors = sorted(jsonschema.Draft7Validator(schema).iter_errors(instance), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError(_format_error(errors[0], prefix))


def resolve(raw: dict | None = None, preset: str | None = None) -> dict:
    """Merge defaults, an optional preset and ``raw``; validate the result."""
    cfg = copy.deepcopy(DEFAULTS)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"preset: unknown preset {preset!r} (choose from {', '.join(sorted(PRESETS))})")
        cfg.update(copy.deepcopy(PRESETS[preset]))
    if raw is not None:
        if not isinstance(raw, dict):
            raise ConfigError("config: top level must be a JSON object")
        _validate(raw, STUDY_SCHEMA, "config")
        cfg.update(copy.deepcopy(raw))
    _validate(cfg, STUDY_SCHEMA, "config")
    for key, table in KIND_SCHEMAS.items():
        sub = cfg[key]
        kind = sub.get("kind")
        if kind not in table:
            raise ConfigError(f"config.{key}.kind: unknown kind {kind!r} (choose from {', '.join(table)})")
        _validate(sub, table[kind], f"config.{key}")
    n_list = cfg["n_list"]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ConfigError("config.n_list: must be strictly increasing")
    if any(n_list[-1] % n for n in n_list):
        raise ConfigError("config.n_list: every entry must divide the largest (matched noise)")
    if cfg["vol"]["kind"] in ("filipovic_kernel", "modes", "rough_exp") and cfg["semigroup"]["kind"] != "shift":
        raise ConfigError(f"config.vol.kind: {cfg['vol']['kind']!r} needs the shift semigroup")
    if cfg["drift"]["kind"] == "hjm" and cfg["semigroup"]["kind"] != "shift":
        raise ConfigError("config.drift.kind: 'hjm' needs the shift semigroup")
    return cfg


@dataclass
class Model:
    """Objects built from a resolved config."""

    semigroup: Semigroup
    Q: SpectralQ
    vol_model: object
    space: FilipovicSpace | None


def build_model(cfg: dict) -> Model:
    sg = cfg["semigroup"]
    d = cfg["dimension"]
    space = None
    if sg["kind"] == "shift":
        space = FilipovicSpace.uniform(sg.get("beta", 0.5), sg.get("x_max", 5.0), sg.get("m", 64))
        S: Semigroup = ShiftSemigroup(space)
        d = space.dim
    elif sg["kind"] == "matrix_exp":
        if "generator" in sg:
            A = np.asarray(sg["generator"], dtype=float)
            if A.shape != (d, d):
                raise ConfigError(f"config.semigroup.generator: expected {d}x{d}, got {A.shape}")
        else:
            A = random_generator(d, sg.get("op_norm", 1.0), sg.get("generator_seed", 0))
        S = MatrixExpSemigroup(A)
    else:
        S = IdentitySemigroup(d)

    v = cfg["vol"]
    kind = v["kind"]
    if kind == "constant":
        if "matrix" in v:
            sigma = np.asarray(v["matrix"], dtype=float)
            if sigma.ndim != 2 or sigma.shape[0] != d:
                raise ConfigError(f"config.vol.matrix: expected {d} rows, got shape {sigma.shape}")
        else:
            sigma = v.get("scale", 1.0) * np.eye(d)
        vol_model: object = ConstantVol(sigma)
        u_dim = sigma.shape[1]
    elif kind == "filipovic_kernel":
        vol_model = ConstantVol(
            smooth_kernel_volatility(space, v.get("c", 0.5), v.get("f_scale", 0.5), v.get("amplitude", 1.0), v.get("width", 0.5)).entries
        )
        u_dim = d
    elif kind == "modes":
        vol_model = ConstantVol(mode_volatility(space, v.get("modes", 4), v.get("amplitude", 1.0)))
        u_dim = v.get("modes", 4)
    elif kind == "bns":
        vol_model = BnsOu(v.get("sigma0_scale", 1.0) * np.eye(d), v.get("rate", 2.0), v.get("jump_scale", 0.5), v.get("kappa", 1.0))
        u_dim = d
    else:
        vol_model = RoughExp(space, v.get("hurst", 0.3), np.asarray(v.get("amplitudes", [0.3, 0.2, 0.1])))
        u_dim = d

    q = cfg["q"]
    if q["kind"] == "geometric":
        rank = min(q.get("rank", u_dim), u_dim)
        Q = SpectralQ.geometric(u_dim, q.get("ratio", 0.5), q.get("first", 1.0), rank)
    elif q["kind"] == "explicit":
        lam = q["eigenvalues"]
        if len(lam) > u_dim:
            raise ConfigError(f"config.q.eigenvalues: {len(lam)} eigenvalues for a noise space of dimension {u_dim}")
        try:
            Q = SpectralQ.diagonal(lam, u_dim)
        except ValueError as exc:
            raise ConfigError(f"config.q.eigenvalues: {exc}") from exc
    else:
        Q = SpectralQ.diagonal(np.ones(u_dim))

    if cfg["drift"]["kind"] == "constant" and len(cfg["drift"]["vector"]) != S.dim:
        raise ConfigError(f"config.drift.vector: expected {S.dim} entries")
    return Model(S, Q, vol_model, space)
