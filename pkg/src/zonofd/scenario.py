"""Scenario files: schema, validation and construction of run inputs.

A scenario is a JSON object with a fixed key layout (documented in the
repository README); matrices are row-major nested arrays and every set is a
``{"center": [...], "generators": [[...]]}`` pair.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .plant import PlantModel, single_fault_bounds
from .setops import Zonotope

DESIGN_MODES = ("fixed-gain", "pfd-unconstrained", "pfd-constrained", "afd-joint")
INPUT_KINDS = ("constant", "afd")


class ScenarioError(ValueError):
    """Scenario file violates the schema."""


@dataclass(frozen=True)
class Scenario:
    plant: PlantModel
    observer_init: tuple[Zonotope, ...]
    aux_init: tuple[Zonotope, ...] | None
    x0: np.ndarray
    true_mode_index: int
    true_fault_value: float | None
    inject_at: int
    input_kind: str
    input_u: np.ndarray | None
    design: str
    fixed_gain: np.ndarray | None
    eps1: float = 0.01
    eps2: float = 0.01
    eps3: float = 0.001
    m: int = 16
    eps_bisect: float = 1e-8
    reduction_order: int = 20
    horizon: int = 30
    seed: int = 0
    u_center: np.ndarray | None = None
    u_radius: float = 4.0
    grid: dict | None = None
    compare_horizon: int = 21
    raw: dict | None = field(default=None, compare=False)

    def with_overrides(self, **kw) -> "Scenario":
        return replace(self, **kw)


def _require(cond: bool, msg: str):
    if not cond:
        raise ScenarioError(msg)


def _matrix(obj, key, rows=None, cols=None):
    _require(key in obj, f"missing key '{key}'")
    try:
        arr = np.asarray(obj[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"'{key}' is not a numeric matrix: {exc}") from exc
    _require(arr.ndim == 2, f"'{key}' must be a nested array (matrix)")
    if rows is not None:
        _require(arr.shape[0] == rows, f"'{key}' must have {rows} rows, got {arr.shape[0]}")
    if cols is not None:
        _require(arr.shape[1] == cols, f"'{key}' must have {cols} columns, got {arr.shape[1]}")
    return arr


def _vector(obj, key, length=None):
    _require(key in obj, f"missing key '{key}'")
    arr = np.asarray(obj[key], dtype=float)
    _require(arr.ndim == 1, f"'{key}' must be a flat array (vector)")
    if length is not None:
        _require(arr.shape[0] == length, f"'{key}' must have length {length}")
    return arr


def _zonotope(obj, key, dim=None) -> Zonotope:
    _require(key in obj, f"missing key '{key}'")
    z = obj[key]
    _require(isinstance(z, dict) and "center" in z and "generators" in z,
             f"'{key}' must be a {{center, generators}} pair")
    center = np.asarray(z["center"], dtype=float)
    gens = np.asarray(z["generators"], dtype=float)
    if gens.size == 0:
        gens = np.zeros((center.shape[0], 0))
    try:
        out = Zonotope(center, gens)
    except ValueError as exc:
        raise ScenarioError(f"'{key}': {exc}") from exc
    if dim is not None:
        _require(out.dim == dim, f"'{key}' must have dimension {dim}")
    return out


def parse_scenario(doc: dict) -> Scenario:
    """Validate a scenario document and build the run inputs."""
    _require(isinstance(doc, dict), "scenario root must be an object")
    _require("plant" in doc, "missing key 'plant'")
    pd = doc["plant"]
    A = _matrix(pd, "A")
    n_x = A.shape[0]
    _require(A.shape[1] == n_x, "'A' must be square")
    B = _matrix(pd, "B", rows=n_x)
    n_u = B.shape[1]
    C = _matrix(pd, "C", cols=n_x)
    n_y = C.shape[0]
    E = _matrix(pd, "E", rows=n_x)
    F = _matrix(pd, "F", rows=n_y)
    _require("fault_intervals" in pd, "missing key 'plant.fault_intervals'")
    intervals = pd["fault_intervals"]
    _require(
        isinstance(intervals, list) and len(intervals) == n_u,
        f"'plant.fault_intervals' must list one [lo, hi] pair per actuator ({n_u})",
    )
    pairs = []
    for pair in intervals:
        _require(isinstance(pair, list) and len(pair) == 2, "fault interval must be [lo, hi]")
        pairs.append((float(pair[0]), float(pair[1])))
    W = _zonotope(pd, "disturbance", dim=E.shape[1])
    V = _zonotope(pd, "noise", dim=F.shape[1])
    try:
        plant = PlantModel(A, B, C, E, F, single_fault_bounds(n_u, pairs), W, V)
    except ValueError as exc:
        raise ScenarioError(f"plant: {exc}") from exc

    x0 = _vector(doc, "x0", length=n_x)
    obs0 = _zonotope(doc, "observer_init", dim=n_x)
    observer_init = tuple(obs0 for _ in range(n_u + 1))
    aux_init = None
    if doc.get("aux_init") is not None:
        aux0 = _zonotope(doc, "aux_init", dim=n_x)
        aux_init = tuple(aux0 for _ in range(n_u + 1))

    _require("true_mode" in doc, "missing key 'true_mode'")
    tm = doc["true_mode"]
    _require(isinstance(tm, dict) and "index" in tm, "'true_mode' needs an 'index'")
    index = int(tm["index"])
    _require(0 <= index <= n_u, f"'true_mode.index' must lie in [0, {n_u}]")
    value = tm.get("value")
    _require(index == 0 or value is not None, "a fault mode needs 'true_mode.value'")
    inject_at = int(tm.get("inject_at", 0))
    _require(inject_at >= 0, "'true_mode.inject_at' must be nonnegative")

    _require("input" in doc, "missing key 'input'")
    inp = doc["input"]
    kind = inp.get("kind")
    _require(kind in INPUT_KINDS, f"'input.kind' must be one of {INPUT_KINDS}")
    input_u = None
    if kind == "constant":
        input_u = _vector(inp, "u", length=n_u)

    design = doc.get("design")
    _require(design in DESIGN_MODES, f"'design' must be one of {DESIGN_MODES}")
    _require(kind != "afd" or design == "afd-joint", "'input.kind' afd requires design afd-joint")
    _require(design != "afd-joint" or kind == "afd", "design afd-joint requires input.kind afd")
    _require(design != "afd-joint" or aux_init is not None, "design afd-joint requires 'aux_init'")

    fixed_gain = None
    if doc.get("fixed_gain") is not None:
        fixed_gain = _matrix(doc, "fixed_gain", rows=n_x, cols=n_y)

    params = doc.get("params", {})
    _require(isinstance(params, dict), "'params' must be an object")

    def fparam(key, default, lo=None, hi=None):
        val = float(params.get(key, default))
        if lo is not None:
            _require(val > lo, f"'params.{key}' must exceed {lo}")
        if hi is not None:
            _require(val < hi, f"'params.{key}' must be below {hi}")
        return val

    horizon = int(params.get("horizon", 30))
    _require(horizon >= 1, "'params.horizon' must be at least 1")
    reduction_order = int(params.get("reduction_order", 20))
    _require(reduction_order >= n_x, f"'params.reduction_order' must be at least {n_x}")
    m = int(params.get("m", 16))
    _require(m >= 1, "'params.m' must be at least 1")
    u_center = np.asarray(params.get("u_center", np.zeros(n_u)), dtype=float)
    _require(u_center.shape == (n_u,), f"'params.u_center' must have length {n_u}")

    grid = doc.get("grid")
    if grid is not None:
        _require(isinstance(grid, dict), "'grid' must be an object")
        _require("values" in grid or {"start", "step", "count"} <= set(grid),
                 "'grid' needs 'values' or start/step/count")
        default_method = design if design != "afd-joint" else "pfd-unconstrained"
        methods = grid.get("methods", [default_method])
        _require(isinstance(methods, list) and methods, "'grid.methods' must be a nonempty list")
        for meth in methods:
            _require(meth in DESIGN_MODES, f"grid method '{meth}' unknown")
            _require(meth != "afd-joint", "grid methods run fixed inputs; use the compare command for the joint design")

    return Scenario(
        plant=plant,
        observer_init=observer_init,
        aux_init=aux_init,
        x0=x0,
        true_mode_index=index,
        true_fault_value=None if value is None else float(value),
        inject_at=inject_at,
        input_kind=kind,
        input_u=input_u,
        design=design,
        fixed_gain=fixed_gain,
        eps1=fparam("eps1", 0.01, lo=-1e-300, hi=1.0),
        eps2=fparam("eps2", 0.01, lo=0.0),
        eps3=fparam("eps3", 0.001, lo=0.0, hi=1.0),
        m=m,
        eps_bisect=fparam("eps_bisect", 1e-8, lo=0.0),
        reduction_order=reduction_order,
        horizon=horizon,
        seed=int(params.get("seed", 0)),
        u_center=u_center,
        u_radius=fparam("u_radius", 4.0, lo=0.0),
        grid=grid,
        compare_horizon=int(doc.get("compare", {}).get("horizon", 21)),
        raw=doc,
    )


def load_scenario(path: str | Path) -> Scenario:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario file {path} is not valid JSON: {exc}") from exc
    return parse_scenario(doc)


def grid_values(scenario: Scenario) -> np.ndarray:
    """Input grid axis from the scenario's grid section."""
    if scenario.grid is None:
        raise ScenarioError("scenario has no 'grid' section")
    g = scenario.grid
    if "values" in g:
        return np.asarray(g["values"], dtype=float)
    start, step, count = float(g["start"]), float(g["step"]), int(g["count"])
    return start + step * np.arange(count)
