"""Simulation campaigns: single runs, input grids, and the AFD/PFD comparison.

Runs are deterministic in (scenario, seed).  Per-step solver failures fall
back to the previous gain/input and are flagged; a violation of the
containment guarantee for the mode the plant is actually in fails the run.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import afd, iqp, pfd
from .observer import SVOState, diagnose, output_set, residual, svo_step
from .plant import sample_in_zonotope, step_plant
from .qfp import BracketError, SolverError, UnboundedBelowError
from .scenario import Scenario, ScenarioError
from .setops import DegenerateSetError, Zonotope, boundary_polygon_2d, contains_point, excluding_degree, f_radius_sq

# detection-step bins (upper edges inclusive); the last open bin catches >= 42
DETECTION_BIN_LABELS = ("1", "2-6", "7-11", "12-26", "27-41", "42+", "none")
COMPARE_CATEGORIES = ("pfd-faster", "equal", "pfd-slower", "pfd-fails")

_SOLVER_ERRORS = (SolverError, UnboundedBelowError, BracketError, pfd.DegenerateDesignError)


class SoundnessError(RuntimeError):
    """The true mode was excluded: a containment guarantee was violated."""


@dataclass
class StepRow:
    step: int
    mode: int
    residual_center_norm: float
    f_norm_size: float
    excluding_degree: float
    contains_origin: bool
    verdict: str
    gamma_star: float
    stability_ok: bool | None
    fallback: bool
    exclusion_degree: float
    exclusion_contains: bool | None


@dataclass
class RunRecord:
    rows: list[StepRow] = field(default_factory=list)
    detection_step: int | None = None
    isolation_step: int | None = None
    isolated_mode: int | None = None
    instant_isolation_step: int | None = None
    sound: bool = True
    violations: list[str] = field(default_factory=list)
    inputs: list[np.ndarray] = field(default_factory=list)
    gains: list[list[np.ndarray]] = field(default_factory=list)
    polygons: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "detection_step": self.detection_step,
            "isolation_step": self.isolation_step,
            "isolated_mode": self.isolated_mode,
            "instant_isolation_step": self.instant_isolation_step,
            "sound": self.sound,
            "violations": list(self.violations),
        }


def detection_bin(step: int | None, horizon: int) -> str:
    if step is None or step > horizon:
        return "none"
    if step <= 1:
        return "1"
    if step <= 6:
        return "2-6"
    if step <= 11:
        return "7-11"
    if step <= 26:
        return "12-26"
    if step <= 41:
        return "27-41"
    return "42+"


def _stability_ok(model, gain, eps3: float) -> bool:
    resid = model.A - gain @ model.C
    return float(np.sum(resid**2)) <= 1.0 - eps3 + 1e-12


def _safe_degree(z: Zonotope) -> float:
    try:
        return excluding_degree(z)
    except DegenerateSetError:
        return float("nan")


def run_scenario(s: Scenario, rng: np.random.Generator | None = None,
                 collect_polygons: bool = False, fail_unsound: bool = False) -> RunRecord:
    """Simulate one scenario end to end.

    Passive designs measure ``y_{k+1}`` first and then pick each observer's
    gain; the joint design picks all gains and the input before injection.

    A residual that excludes the origin certifies its mode was never the
    active one, so rejections accumulate: the recorded isolation step is the
    first instant all but one mode have been rejected (the stricter
    single-instant singleton is kept alongside), and rejected modes stop
    contributing weight to the joint design so the input keeps separating the
    still-ambiguous hypotheses.
    """
    model = s.plant
    n_modes = model.n_u + 1
    rng = np.random.default_rng(s.seed) if rng is None else rng
    record = RunRecord()

    init_gain = s.fixed_gain if s.fixed_gain is not None else np.zeros((model.n_x, model.n_y))
    observers = [SVOState(i, s.observer_init[i], init_gain) for i in range(n_modes)]
    aux_bank = afd.AuxSetBank(s.aux_init) if s.aux_init is not None else None
    exclusion_sets: list[Zonotope] | None = None
    prev_gains = [np.asarray(init_gain, dtype=float) for _ in range(n_modes)]
    prev_u = s.u_center if s.u_center is not None else np.zeros(model.n_u)
    prev_gamma_pfd = [None] * n_modes
    prev_gamma_joint = None
    constrained = s.design in ("pfd-constrained", "afd-joint")
    stability = iqp.stability_ball(model.A, model.C, s.eps3) if s.design == "pfd-constrained" else None

    x = np.asarray(s.x0, dtype=float)
    y = model.C @ x + model.F @ sample_in_zonotope(model.V, rng)
    healthy = model.true_mode(0)
    fault = model.true_mode(s.true_mode_index, s.true_fault_value) if s.true_mode_index else healthy
    rejected: set[int] = set()

    for k in range(s.horizon):
        true_mode = fault if k >= s.inject_at else healthy
        guaranteed = true_mode.index if s.inject_at == 0 else (0 if k < s.inject_at else None)
        fallback = [False] * n_modes
        gammas = [float("nan")] * n_modes
        excl_rows = [(float("nan"), None)] * n_modes

        if s.design == "afd-joint":
            active = [i for i in range(n_modes) if i not in rejected]
            if not active:
                active = list(range(n_modes))
            if exclusion_sets is None:
                weights = afd.ModeWeights.uniform(n_modes)
            else:
                try:
                    active_w = afd.mode_weights([exclusion_sets[i] for i in active])
                    sigma = np.zeros(n_modes)
                    sigma[active] = active_w.sigma
                    weights = afd.ModeWeights(sigma)
                except DegenerateSetError:
                    weights = afd.ModeWeights.uniform(n_modes)
            problem, layout = afd.build_joint_problem(
                model, aux_bank, observers, weights, y, s.eps1, s.eps2
            )
            cons = afd.joint_constraints(model, layout, s.eps3, s.u_center, s.u_radius)
            try:
                design = afd.design_joint(
                    problem, layout, cons, eps=s.eps_bisect, prev_gamma=prev_gamma_joint, m=s.m
                )
                gains = design.gains
                u = design.u
                prev_gamma_joint = design.gamma
                gammas = [design.gamma] * n_modes
            except _SOLVER_ERRORS:
                gains = prev_gains
                u = prev_u
                fallback = [True] * n_modes
            exclusion_sets = [
                afd.build_exclusion_set(model, aux_bank[i], observers[i], gains[i], u, y,
                                        s.eps1, s.eps2)
                for i in range(n_modes)
            ]
            excl_rows = [
                (_safe_degree(e), contains_point(e, np.zeros(model.n_x)))
                for e in exclusion_sets
            ]
        else:
            u = np.asarray(s.input_u, dtype=float)

        w = sample_in_zonotope(model.W, rng)
        v_next = sample_in_zonotope(model.V, rng)
        x_next, _ = step_plant(model, x, u, true_mode, w, v_next)
        y_next = model.C @ x_next + model.F @ v_next

        if s.design in ("pfd-unconstrained", "pfd-constrained"):
            gains = []
            for i in range(n_modes):
                problem = pfd.build_pfd_problem(model, observers[i], u, y, y_next, s.eps1)
                try:
                    design = pfd.design_pfd_gain(
                        problem,
                        constraint=stability,
                        eps=s.eps_bisect,
                        prev_gamma=prev_gamma_pfd[i],
                        m=s.m,
                    )
                    gains.append(design.gain)
                    prev_gamma_pfd[i] = design.gamma
                    gammas[i] = design.gamma
                except _SOLVER_ERRORS:
                    gains.append(prev_gains[i])
                    fallback[i] = True
        elif s.design == "fixed-gain":
            gains = prev_gains

        observers = [
            svo_step(model, observers[i].with_gain(gains[i]), u, y, s.eps1, s.reduction_order)
            for i in range(n_modes)
        ]
        if aux_bank is not None:
            aux_bank = afd.step_aux_bank(model, aux_bank, u, s.eps1, s.eps2, s.reduction_order)
        residuals = [residual(y_next, output_set(model, obs)) for obs in observers]
        diag = diagnose(residuals)
        step = k + 1

        rejected |= {i for i in range(n_modes) if not diag.membership[i]}
        if record.detection_step is None and not diag.membership[0]:
            record.detection_step = step
        if record.instant_isolation_step is None and diag.verdict == "isolated":
            record.instant_isolation_step = step
        if record.isolation_step is None and len(rejected) == n_modes - 1:
            record.isolation_step = step
            record.isolated_mode = next(i for i in range(n_modes) if i not in rejected)
        if guaranteed is not None:
            if not diag.membership[guaranteed]:
                record.sound = False
                record.violations.append(f"step {step}: residual of true mode {guaranteed} excludes origin")
            excl_ok = excl_rows[guaranteed][1]
            if excl_ok is False:
                record.sound = False
                record.violations.append(f"step {step}: exclusion set of true mode {guaranteed} excludes origin")

        for i in range(n_modes):
            r = residuals[i]
            record.rows.append(StepRow(
                step=step,
                mode=i,
                residual_center_norm=float(np.linalg.norm(r.center)),
                f_norm_size=f_radius_sq(r),
                excluding_degree=_safe_degree(r),
                contains_origin=diag.membership[i],
                verdict=diag.verdict,
                gamma_star=gammas[i],
                stability_ok=_stability_ok(model, gains[i], s.eps3) if constrained else None,
                fallback=fallback[i],
                exclusion_degree=excl_rows[i][0],
                exclusion_contains=excl_rows[i][1],
            ))
        if collect_polygons and model.n_y == 2:
            for i in range(n_modes):
                record.polygons[(step, i)] = boundary_polygon_2d(residuals[i])

        record.inputs.append(np.asarray(u, dtype=float).copy())
        record.gains.append([np.asarray(g, dtype=float).copy() for g in gains])
        prev_gains = [np.asarray(g, dtype=float) for g in gains]
        prev_u = u
        x = x_next
        y = y_next

    if fail_unsound and not record.sound:
        raise SoundnessError("; ".join(record.violations))
    return record


@dataclass
class GridResult:
    axis: np.ndarray
    methods: list[str]
    detection: dict[str, np.ndarray]  # method -> (n, n) detection steps (sentinel = horizon + 1)
    horizon: int
    classification: np.ndarray | None = None  # pairwise method[0] vs method[1]
    sound: bool = True

    def bin_counts(self, method: str) -> dict[str, int]:
        steps = self.detection[method]
        counts = dict.fromkeys(DETECTION_BIN_LABELS, 0)
        for val in steps.ravel():
            step = None if val > self.horizon else int(val)
            counts[detection_bin(step, self.horizon)] += 1
        return counts


def _grid_cell(args):
    scenario, u1, u2, method, cell_seed = args
    cell = scenario.with_overrides(
        input_kind="constant",
        input_u=np.array([u1, u2]),
        design=method,
        aux_init=None,
    )
    rng = np.random.default_rng(np.random.SeedSequence((cell_seed, 0xC0FFEE)))
    rec = run_scenario(cell, rng=rng)
    return rec.detection_step, rec.sound


def run_input_grid(base: Scenario, axis, methods: list[str], parallel: int = 1) -> GridResult:
    """Detection steps over a constant-input grid, per design method.

    Each cell reuses the same noise stream across methods (seeded by the cell
    index), so per-cell comparisons are paired.  The sentinel ``horizon + 1``
    encodes "not detected".
    """
    axis = np.asarray(axis, dtype=float)
    n = axis.shape[0]
    tasks = []
    for method in methods:
        for i, u1 in enumerate(axis):
            for j, u2 in enumerate(axis):
                cell_seed = (base.seed, i * n + j)
                tasks.append((base, u1, u2, method, cell_seed))
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_grid_cell, tasks, chunksize=8))
    else:
        results = [_grid_cell(t) for t in tasks]
    detection = {}
    idx = 0
    sentinel = base.horizon + 1
    all_sound = True
    for method in methods:
        table = np.empty((n, n), dtype=int)
        for i in range(n):
            for j in range(n):
                step, cell_sound = results[idx]
                all_sound = all_sound and cell_sound
                table[i, j] = sentinel if step is None else step
                idx += 1
        detection[method] = table
    classification = None
    if len(methods) == 2:
        a, b = detection[methods[0]], detection[methods[1]]
        classification = np.empty((n, n), dtype=object)
        for i in range(n):
            for j in range(n):
                if a[i, j] >= sentinel and b[i, j] >= sentinel:
                    classification[i, j] = "neither-detects"
                elif a[i, j] < b[i, j]:
                    classification[i, j] = "faster"
                elif a[i, j] > b[i, j]:
                    classification[i, j] = "slower"
                else:
                    classification[i, j] = "equal"
    return GridResult(axis=axis, methods=list(methods), detection=detection,
                      horizon=base.horizon, classification=classification, sound=all_sound)


@dataclass
class CompareResult:
    axis: np.ndarray
    horizon: int
    afd_step: int  # sentinel = horizon + 1
    pfd_steps: np.ndarray
    categories: np.ndarray
    sound: bool = True

    def category_counts(self) -> dict[str, int]:
        counts = dict.fromkeys(COMPARE_CATEGORIES, 0)
        for cat in self.categories.ravel():
            counts[cat] += 1
        return counts

    def afd_faster_or_equal_fraction(self) -> float:
        counts = self.category_counts()
        total = self.categories.size
        return (total - counts["pfd-faster"]) / total


def _compare_cell(args):
    scenario, u1, u2, cell_seed = args
    cell = scenario.with_overrides(
        input_kind="constant",
        input_u=np.array([u1, u2]),
        aux_init=None,
        horizon=scenario.horizon,
    )
    rng = np.random.default_rng(np.random.SeedSequence((cell_seed, 0xC0FFEE)))
    rec = run_scenario(cell, rng=rng)
    return rec.isolation_step, rec.sound


def run_afd_vs_pfd(base: Scenario, axis, horizon: int = 21, parallel: int = 1,
                   pfd_design: str = "pfd-unconstrained") -> CompareResult:
    """Isolation times: the joint design (one run) against a PFD input grid.

    The joint design chooses its own input, so its column is a single run;
    the four categories follow the comparison convention: pfd faster / equal /
    pfd slower but isolates / pfd fails within the horizon.
    """
    axis = np.asarray(axis, dtype=float)
    n = axis.shape[0]
    sentinel = horizon + 1
    afd_scenario = base.with_overrides(
        design="afd-joint", input_kind="afd", input_u=None, horizon=horizon
    )
    if afd_scenario.aux_init is None:
        raise ScenarioError("afd-vs-pfd comparison needs 'aux_init'")
    afd_rec = run_scenario(afd_scenario, rng=np.random.default_rng(np.random.SeedSequence((base.seed, 0xAFD))))
    afd_step = sentinel if afd_rec.isolation_step is None else afd_rec.isolation_step

    pfd_base = base.with_overrides(design=pfd_design, horizon=horizon)
    tasks = []
    for i, u1 in enumerate(axis):
        for j, u2 in enumerate(axis):
            tasks.append((pfd_base, u1, u2, (base.seed, i * n + j)))
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_compare_cell, tasks, chunksize=8))
    else:
        results = [_compare_cell(t) for t in tasks]

    pfd_steps = np.empty((n, n), dtype=int)
    categories = np.empty((n, n), dtype=object)
    idx = 0
    all_sound = afd_rec.sound
    for i in range(n):
        for j in range(n):
            step, cell_sound = results[idx]
            all_sound = all_sound and cell_sound
            idx += 1
            p = sentinel if step is None else step
            pfd_steps[i, j] = p
            if p >= sentinel:
                categories[i, j] = "pfd-fails"
            elif afd_step >= sentinel or p < afd_step:
                categories[i, j] = "pfd-faster"
            elif p == afd_step:
                categories[i, j] = "equal"
            else:
                categories[i, j] = "pfd-slower"
    return CompareResult(axis=axis, horizon=horizon, afd_step=afd_step,
                         pfd_steps=pfd_steps, categories=categories, sound=all_sound)


# ---------------------------------------------------------------------------
# result emission

TRACE_FIELDS = [
    "step", "mode", "residual-center-norm", "f-norm-size", "excluding-degree",
    "contains-origin", "verdict", "gamma-star", "stability-ok", "fallback",
    "exclusion-degree", "exclusion-contains",
]


def _row_values(row: StepRow):
    def fmt(x):
        if x is None:
            return ""
        if isinstance(x, bool):
            return str(x).lower()
        if isinstance(x, float):
            return repr(x)
        return str(x)

    return [fmt(v) for v in (
        row.step, row.mode, row.residual_center_norm, row.f_norm_size,
        row.excluding_degree, row.contains_origin, row.verdict, row.gamma_star,
        row.stability_ok, row.fallback, row.exclusion_degree, row.exclusion_contains,
    )]


def write_trace(record: RunRecord, path: Path, fmt: str = "csv"):
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_FIELDS)
            for row in record.rows:
                writer.writerow(_row_values(row))
    else:
        payload = [dict(zip(TRACE_FIELDS, _row_values(row))) for row in record.rows]
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)


def write_polygons(record: RunRecord, out_dir: Path):
    """One CSV per (step, mode): closed vertex loop (first vertex repeated)."""
    out_dir.mkdir(parents=True, exist_ok=True)
    for (step, mode), verts in sorted(record.polygons.items()):
        with open(out_dir / f"{step:03d}_{mode}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y"])
            closed = np.vstack((verts, verts[:1]))
            for vx, vy in closed:
                writer.writerow([repr(float(vx)), repr(float(vy))])


def write_grid(result: GridResult, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["u1", "u2", "method", "detection-step"]
        if result.classification is not None:
            header.append("classification")
        writer.writerow(header)
        n = result.axis.shape[0]
        for method in result.methods:
            for i in range(n):
                for j in range(n):
                    row = [repr(float(result.axis[i])), repr(float(result.axis[j])),
                           method, str(int(result.detection[method][i, j]))]
                    if result.classification is not None:
                        row.append(result.classification[i, j] if method == result.methods[0] else "")
                    writer.writerow(row)


def write_compare(result: CompareResult, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["u1", "u2", "pfd-step", "afd-step", "category"])
        n = result.axis.shape[0]
        for i in range(n):
            for j in range(n):
                writer.writerow([
                    repr(float(result.axis[i])), repr(float(result.axis[j])),
                    str(int(result.pfd_steps[i, j])), str(int(result.afd_step)),
                    result.categories[i, j],
                ])


def write_scenario_echo(scenario: Scenario, summary: dict, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump({"scenario": scenario.raw, "summary": summary}, fh, indent=1, default=str)


def emit_results(result, out_dir: str | Path, fmt: str = "csv",
                 scenario: Scenario | None = None, summary: dict | None = None):
    """Write whichever result was produced into ``out_dir``.

    Run records get ``trace.csv``/``trace.json`` plus ``polygons/``; grid and
    comparison results get their respective CSVs; the scenario echo is added
    whenever a scenario is supplied.
    """
    out = Path(out_dir)
    if isinstance(result, RunRecord):
        write_trace(result, out / ("trace.csv" if fmt == "csv" else "trace.json"), fmt=fmt)
        if result.polygons:
            write_polygons(result, out / "polygons")
        if scenario is not None:
            write_scenario_echo(scenario, summary or result.summary(), out / "scenario-echo.json")
    elif isinstance(result, GridResult):
        write_grid(result, out / "grid.csv")
        if scenario is not None:
            write_scenario_echo(scenario, summary or {}, out / "scenario-echo.json")
    elif isinstance(result, CompareResult):
        write_compare(result, out / "compare.csv")
        if scenario is not None:
            write_scenario_echo(scenario, summary or {}, out / "scenario-echo.json")
    else:
        raise TypeError(f"cannot emit {type(result).__name__}")
