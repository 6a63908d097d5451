"""Declarative run configuration: YAML files, named presets, validation.

A config either names a catalog case (``case:``) and overrides some of
its fields, or defines a case inline.  Everything is checked before any
computation starts or any file is written; problems raise ``ConfigError``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from .experiments import (PROFILES, REACTIVE_PROFILE, TestCase, astar_rule,
                          catalog)
from .fields import BoxProfile, ConstantProfile, CosineProfile
from .reaction import MassAction3, steady_state
from .scheme import CrossDiffusionMatrix
from .solver import SolverConfig

SCHEMA_VERSION = 1

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}
_interval = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "case": {"type": "string"},
        "name": {"type": "string"},
        "domain": {"type": "array", "items": _interval, "minItems": 1, "maxItems": 2},
        "cells": {"type": "array", "items": _posint, "minItems": 1, "maxItems": 2},
        "dt": _pos,
        "final_time": _pos,
        "matrix": {"type": "array", "minItems": 2,
                   "items": {"type": "array", "items": _num}},
        "astar": {"oneOf": [_pos, {
            "type": "object", "additionalProperties": False,
            "required": ["epsilon"], "properties": {"epsilon": _pos}}]},
        "initial": {"oneOf": [
            {"enum": ["smooth", "rough", "reactive"]},
            {"type": "object", "additionalProperties": False, "required": ["constant"],
             "properties": {"constant": {"type": "array", "items": _num}}},
            {"type": "object", "additionalProperties": False, "required": ["cosine"],
             "properties": {"cosine": {
                 "type": "object", "additionalProperties": False,
                 "required": ["offsets", "amplitudes"],
                 "properties": {"offsets": {"type": "array", "items": _num},
                                "amplitudes": {"type": "array", "items": _num},
                                "wavenumber": _posint}}}},
            {"type": "object", "additionalProperties": False, "required": ["boxes"],
             "properties": {
                 "boxes": {"type": "array", "items": {
                     "type": "array", "items": {"type": "array", "items": _interval}}},
                 "fill": {"type": "integer", "minimum": 0}}},
        ]},
        "reaction": {"oneOf": [{"type": "null"}, {
            "type": "object", "additionalProperties": False,
            "required": ["forward_rate", "backward_rate"],
            "properties": {"forward_rate": _pos, "backward_rate": _pos,
                           "mean": {"type": "array", "items": _num}}}]},
        "reference": {"enum": ["closed_form", "finest", "none"]},
        "solver": {"type": "object", "additionalProperties": False, "properties": {
            "newton_tol": _pos, "newton_max_iter": _posint, "floor_factor": _num,
            "continuation_min_gap": _pos, "residual_tol": _pos,
            "safeguarded": {"type": "boolean"}}},
        "output": {"type": "object", "additionalProperties": False, "properties": {
            "directory": {"type": "string"}, "stride": _posint}},
        "reproducible": {"type": "boolean"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "convergence": {"type": "object", "additionalProperties": False, "properties": {
            "grid_sizes": {"type": "array", "items": _posint, "minItems": 2},
            "reference_size": _posint, "dt": _pos, "workers": _posint}},
        "sweep": {"type": "object", "additionalProperties": False, "properties": {
            "cells": _posint, "astar": {"type": "array", "items": _pos, "minItems": 1},
            "refine": {"type": "boolean"}, "tol": _pos, "reference_size": _posint,
            "dt": _pos, "workers": _posint}},
        "validate": {"type": "object", "additionalProperties": False, "properties": {
            "samples": _posint}},
    },
}


class ConfigError(ValueError):
    """Invalid configuration; raised before any output is produced."""


@dataclass
class RunConfig:
    case: TestCase
    output: Path = Path("out")
    stride: int = 1
    reproducible: bool = False
    seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    convergence: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    samples: int = 10_000

    def matrix(self) -> CrossDiffusionMatrix:
        return _matrix(self.case.coefficients, self.case.astar)


def preset_names() -> list:
    root = resources.files("crossdiff") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_preset(name: str) -> dict:
    path = resources.files("crossdiff") / "presets" / f"{name}.yaml"
    if not path.is_file():
        return {"case": name}
    return yaml.safe_load(path.read_text()) or {}


def read_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def _matrix(A, astar):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return CrossDiffusionMatrix(A, astar)


def _profile(sel, n_species, dim):
    if isinstance(sel, str):
        if sel == "reactive":
            return REACTIVE_PROFILE
        return PROFILES[sel]
    if "constant" in sel:
        return ConstantProfile(sel["constant"])
    if "cosine" in sel:
        c = sel["cosine"]
        return CosineProfile(c["offsets"], c["amplitudes"], c.get("wavenumber", 1))
    boxes = [[tuple(tuple(iv) for iv in box) for box in sp] for sp in sel["boxes"]]
    if len(boxes) != n_species:
        raise ConfigError("initial boxes: one list per species expected")
    if any(len(b) != dim for sp in boxes for b in sp):
        raise ConfigError("initial boxes must match the domain dimension")
    return BoxProfile(boxes, fill=sel.get("fill"))


def build(data: dict, *, out=None, stride=None, reproducible=None,
          seed=None) -> RunConfig:
    """Validate a raw mapping and turn it into a ``RunConfig``."""
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None

    cases = catalog()
    if "case" in data:
        if data["case"] not in cases:
            raise ConfigError(f"unknown case {data['case']!r}; "
                              f"known: {', '.join(sorted(cases))}")
        case = cases[data["case"]]
    else:
        missing = [k for k in ("domain", "cells", "dt", "final_time", "matrix",
                               "astar", "initial") if k not in data]
        if missing:
            raise ConfigError(f"inline case needs: {', '.join(missing)}")
        case = None

    kw = {}
    if "name" in data:
        kw["name"] = data["name"]
    elif case is None:
        kw["name"] = "inline"
    for key in ("dt", "final_time", "reference"):
        if key in data:
            kw[key] = data[key]
    if "domain" in data:
        kw["domain"] = tuple((float(a), float(b)) for a, b in data["domain"])
        if any(b <= a for a, b in kw["domain"]):
            raise ConfigError("domain intervals must have lo < hi")
    if "cells" in data:
        kw["cells"] = tuple(data["cells"])
    if "matrix" in data:
        kw["coefficients"] = np.asarray(data["matrix"], dtype=float)
    try:
        case = replace(case, **kw) if case is not None else TestCase(
            kw.pop("name"), kw.pop("coefficients"), 0.1, None, kw.pop("final_time"),
            kw.pop("dt"), **kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None

    dim = len(case.domain)
    if len(case.cells) != dim:
        raise ConfigError(f"cells must have {dim} entr{'y' if dim == 1 else 'ies'}")
    if case.dt > case.final_time:
        raise ConfigError("dt exceeds final_time")

    A = np.asarray(case.coefficients, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ConfigError("matrix must be square")
    n = A.shape[0]

    astar = data.get("astar", case.astar)
    if isinstance(astar, dict):
        mesh = case.mesh()
        try:
            astar = astar_rule(A, mesh.size, case.dt, astar["epsilon"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    try:
        _matrix(A, astar)
    except ValueError as exc:
        raise ConfigError(f"matrix: {exc}") from None
    case = replace(case, astar=float(astar))

    if "initial" in data:
        case = replace(case, profile=_profile(data["initial"], n, dim))

    if "reaction" in data:
        r = data["reaction"]
        if r is None:
            case = replace(case, reaction=None)
        else:
            if n != 3:
                raise ConfigError("the mass-action reaction needs 3 species")
            model = MassAction3(r["forward_rate"], r["backward_rate"])
            mean = r.get("mean")
            if mean is None:
                probe = case.initial_state(case.mesh())
                mesh = case.mesh()
                mean = probe @ mesh.cell_measures / mesh.measure
            try:
                ueq, _ = steady_state(model, mean)
            except ValueError as exc:
                raise ConfigError(f"reaction: {exc}") from None
            case = replace(case, reaction=model.with_equilibrium(ueq))

    if case.reference == "closed_form":
        off = A[~np.eye(n, dtype=bool)]
        if not (np.all(off == off[0]) and isinstance(case.profile, CosineProfile)
                and case.reaction is None):
            raise ConfigError("closed_form reference needs equal coefficients, "
                              "cosine data and no reaction")

    try:
        U0 = case.initial_state(case.mesh())
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"initial data: {exc}") from None
    if U0.shape[0] != n:
        raise ConfigError(f"initial data has {U0.shape[0]} species, matrix has {n}")

    try:
        solver = SolverConfig(**data.get("solver", {}),
                              reproducible=bool(reproducible if reproducible is not None
                                                else data.get("reproducible", False)))
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from None

    conv = dict(data.get("convergence", {}))
    if "grid_sizes" in conv and sorted(set(conv["grid_sizes"])) != conv["grid_sizes"]:
        raise ConfigError("convergence.grid_sizes must be strictly increasing")
    output = data.get("output", {})
    return RunConfig(
        case=case,
        output=Path(out if out is not None else output.get("directory", "out")),
        stride=int(stride if stride is not None else output.get("stride", 1)),
        reproducible=solver.reproducible,
        seed=int(seed if seed is not None else data.get("seed", 0)),
        solver=solver,
        convergence=conv,
        sweep=dict(data.get("sweep", {})),
        samples=int(data.get("validate", {}).get("samples", 10_000)),
    )


def resolve(case_name=None, config_path=None, **overrides) -> RunConfig:
    """Merge a preset (``--case``) with a file (``--config``); the file wins."""
    if case_name is None and config_path is None:
        raise ConfigError("give --case or --config")
    data = {}
    if case_name is not None:
        if case_name not in catalog():
            raise ConfigError(f"unknown case {case_name!r}; "
                              f"known: {', '.join(sorted(catalog()))}")
        data.update(load_preset(case_name))
    if config_path is not None:
        data.update(read_config(config_path))
    return build(data, **overrides)


__all__ = ["SCHEMA", "SCHEMA_VERSION", "ConfigError", "RunConfig", "build",
           "resolve", "read_config", "load_preset", "preset_names"]
