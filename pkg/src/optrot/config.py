"""Experiment configuration: parsing and validation with field-path diagnostics.

Layout::

    {"mesh": {"builtin": "unit-square", "params": {...}} | {"n", "vertices", "cells", "boundary"},
     "field": {"builtin": "uniform-tension", "params": {...}} | {"traction", "body", ...},
     "density": {"mu": 1.0, "lambda": 1.0},
     "epsilons": [0.1, 0.05, ...],
     "solver": {"gtol": 1e-10, "max_iters": 5000, "seed": 0},
     "recovery": {"u0": "zero" | "linear" | [[...]], "R0": "base" | [[...]], "W0": [[...]]},
     "warm_start": true}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .elasticity import DensityParams, SolverOptions, TractionProblem
from .errors import InvalidArgumentError, OptrotError
from .forces import ForceField, field_from_dict
from .harness import DEFAULT_EPSILONS
from .mesh import Mesh, builtin_mesh


class ConfigError(InvalidArgumentError):
    """A configuration problem, tagged with the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


TOP_LEVEL = {"mesh", "field", "density", "epsilons", "solver", "recovery", "warm_start"}


@dataclass
class Experiment:
    raw: dict
    mesh: Mesh
    field: ForceField
    params: DensityParams
    epsilons: tuple[float, ...]
    solver: SolverOptions
    recovery: dict = field(default_factory=dict)
    warm_start: bool = True

    def problem(self) -> TractionProblem:
        return TractionProblem(self.mesh, self.field, self.params)


def _expect(value, kind, path, what):
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ConfigError(path, f"expected {what}, got {type(value).__name__}")
    return value


def _number(value, path, positive=False, nonnegative=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {type(value).__name__}")
    v = float(value)
    if not math.isfinite(v):
        raise ConfigError(path, "must be finite")
    if positive and not v > 0:
        raise ConfigError(path, "must be positive")
    if nonnegative and not v >= 0:
        raise ConfigError(path, "must be nonnegative")
    return v


def _matrix(value, path, n) -> np.ndarray:
    try:
        a = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(path, "expected a numeric matrix") from None
    if a.shape != (n, n) or not np.all(np.isfinite(a)):
        raise ConfigError(path, f"expected a finite {n}x{n} matrix")
    return a


def _mesh(data, path="mesh") -> Mesh:
    _expect(data, dict, path, "an object")
    try:
        if "builtin" in data:
            params = _expect(data.get("params", {}), dict, f"{path}.params", "an object")
            return builtin_mesh(_expect(data["builtin"], str, f"{path}.builtin", "a string"), **params)
        return Mesh.from_dict(data)
    except ConfigError:
        raise
    except (OptrotError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None


def _field(data, mesh: Mesh, path="field") -> ForceField:
    _expect(data, dict, path, "an object")
    if "builtin" in data:
        _expect(data["builtin"], str, f"{path}.builtin", "a string")
        _expect(data.get("params", {}), dict, f"{path}.params", "an object")
    try:
        return field_from_dict(mesh, data)
    except (OptrotError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None


def parse(data: dict, seed: int | None = None) -> Experiment:
    """Validate a configuration object; ``seed`` overrides ``solver.seed``."""
    _expect(data, dict, "<root>", "an object")
    unknown = sorted(set(data) - TOP_LEVEL)
    if unknown:
        raise ConfigError(unknown[0], "unknown field")
    if "mesh" not in data:
        raise ConfigError("mesh", "required field missing")
    mesh = _mesh(data["mesh"])
    ff = _field(data.get("field", {"builtin": "zero"}), mesh)

    dens = _expect(data.get("density", {}), dict, "density", "an object")
    for key in dens:
        if key not in ("mu", "lambda"):
            raise ConfigError(f"density.{key}", "unknown field")
    mu = _number(dens.get("mu", 1.0), "density.mu", positive=True)
    lam = _number(dens.get("lambda", 1.0), "density.lambda", nonnegative=True)

    eps_raw = _expect(data.get("epsilons", list(DEFAULT_EPSILONS)), list, "epsilons", "a list")
    if not eps_raw:
        raise ConfigError("epsilons", "must not be empty")
    eps = tuple(_number(e, f"epsilons[{i}]", positive=True) for i, e in enumerate(eps_raw))

    sol = _expect(data.get("solver", {}), dict, "solver", "an object")
    for key in sol:
        if key not in ("gtol", "max_iters", "seed", "memory"):
            raise ConfigError(f"solver.{key}", "unknown field")
    opts = SolverOptions()
    if "gtol" in sol:
        opts.gtol = _number(sol["gtol"], "solver.gtol", positive=True)
    for key in ("max_iters", "memory", "seed"):
        if key in sol:
            v = _expect(sol[key], int, f"solver.{key}", "an integer")
            if v < (0 if key == "seed" else 1):
                raise ConfigError(f"solver.{key}", "out of range")
            setattr(opts, key, v)
    if seed is not None:
        opts.seed = int(seed)

    rec = _expect(data.get("recovery", {}), dict, "recovery", "an object")
    recovery = _recovery(rec, mesh.n, mesh.n_vertices)
    warm = _expect(data.get("warm_start", True), bool, "warm_start", "a boolean")
    return Experiment(data, mesh, ff, DensityParams(mu, lam), eps, opts, recovery, warm)


def _recovery(rec: dict, n: int, n_vertices: int) -> dict:
    out: dict = {}
    for key in rec:
        if key not in ("u0", "R0", "W0"):
            raise ConfigError(f"recovery.{key}", "unknown field")
    u0 = rec.get("u0", "zero")
    if isinstance(u0, str):
        if u0 not in ("zero", "linear"):
            raise ConfigError("recovery.u0", "expected 'zero', 'linear' or a (V, n) array")
        out["u0"] = u0
    else:
        try:
            arr = np.asarray(u0, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError("recovery.u0", "expected a numeric array") from None
        if arr.shape != (n_vertices, n) or not np.all(np.isfinite(arr)):
            raise ConfigError("recovery.u0", f"expected a finite ({n_vertices}, {n}) array")
        out["u0"] = arr
    r0 = rec.get("R0", "base")
    if isinstance(r0, str):
        if r0 != "base":
            raise ConfigError("recovery.R0", "expected 'base' or a rotation matrix")
        out["R0"] = r0
    else:
        r = _matrix(r0, "recovery.R0", n)
        if np.linalg.norm(r.T @ r - np.eye(n)) > 1e-8 or np.linalg.det(r) <= 0:
            raise ConfigError("recovery.R0", "not a rotation matrix")
        out["R0"] = r
    w = _matrix(rec.get("W0", np.zeros((n, n)).tolist()), "recovery.W0", n)
    if np.linalg.norm(w + w.T) > 1e-10 * max(1.0, np.linalg.norm(w)):
        raise ConfigError("recovery.W0", "not skew-symmetric")
    out["W0"] = 0.5 * (w - w.T)
    return out


def load(path, seed: int | None = None) -> Experiment:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {p}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"<json line {exc.lineno} col {exc.colno}>", exc.msg) from None
    return parse(data, seed)
