"""Ground-truth simulation of the multi-mode LTI plant.

Dynamics: ``x+ = A x + B G u + E w`` with measurement ``y = C x + F v``,
where ``G`` is a diagonal actuator-health matrix.  Mode 0 is healthy
(``G = I``); mode ``i >= 1`` scales actuator ``i`` by a factor inside the
configured fault interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .setops import IntervalMatrix, Zonotope, closed_fault_interval, contains_point


@dataclass(frozen=True)
class TrueMode:
    """A realized actuator mode: index plus the actual diagonal gain matrix."""

    index: int
    G: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "G", np.asarray(self.G, dtype=float))


def single_fault_bounds(n_u: int, fault_intervals) -> list[IntervalMatrix]:
    """Mode-bound list: identity at index 0, a single-fault interval per actuator.

    ``fault_intervals[i-1]`` is the ``(lo, hi)`` health interval of actuator
    ``i``; it must sit inside ``[0, 1)`` (``hi = 1`` is read as the half-open
    generic bound and closed later with eps1).
    """
    bounds = [IntervalMatrix.exact(np.eye(n_u))]
    for i, (lo, hi) in enumerate(fault_intervals):
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValueError(f"fault interval ({lo}, {hi}) outside [0, 1]")
        lower = np.eye(n_u)
        upper = np.eye(n_u)
        lower[i, i] = lo
        upper[i, i] = hi
        bounds.append(IntervalMatrix(lower, upper))
    return bounds


class PlantModel:
    """LTI matrices, per-mode fault bounds and the disturbance/noise sets."""

    __slots__ = ("A", "B", "C", "E", "F", "mode_bounds", "W", "V")

    def __init__(self, A, B, C, E, F, mode_bounds, W: Zonotope, V: Zonotope):
        self.A = np.asarray(A, dtype=float)
        self.B = np.asarray(B, dtype=float)
        self.C = np.asarray(C, dtype=float)
        self.E = np.asarray(E, dtype=float)
        self.F = np.asarray(F, dtype=float)
        self.mode_bounds = list(mode_bounds)
        self.W = W
        self.V = V
        n_x, n_u, n_y = self.A.shape[0], self.B.shape[1], self.C.shape[0]
        if self.A.shape != (n_x, n_x):
            raise ValueError("A must be square")
        if self.B.shape[0] != n_x or self.C.shape[1] != n_x or self.E.shape[0] != n_x:
            raise ValueError("B, C, E row/column counts must match the state dimension")
        if self.F.shape[0] != n_y:
            raise ValueError("F must have one row per output")
        if W.dim != self.E.shape[1] or V.dim != self.F.shape[1]:
            raise ValueError("disturbance/noise set dimensions must match E/F columns")
        if len(self.mode_bounds) != n_u + 1:
            raise ValueError(f"expected {n_u + 1} mode bounds, got {len(self.mode_bounds)}")
        first = self.mode_bounds[0]
        if not (
            np.array_equal(first.lower, np.eye(n_u)) and np.array_equal(first.upper, np.eye(n_u))
        ):
            raise ValueError("mode_bounds[0] must be the exact identity")
        for i, gi in enumerate(self.mode_bounds[1:], start=1):
            idx, _, _ = closed_fault_interval(gi, 0.0)
            if idx != i - 1:
                raise ValueError(f"mode bound {i} must vary in diagonal entry {i - 1}")

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]

    @property
    def n_y(self) -> int:
        return self.C.shape[0]

    def fault_term(self, mode: int, eps1: float) -> tuple[int | None, float, float]:
        """Closed-interval ``(actuator index, mid, rad)`` for an observer mode."""
        return closed_fault_interval(self.mode_bounds[mode], eps1)

    def true_mode(self, index: int, g: float | None = None) -> TrueMode:
        """Realize mode ``index`` with fault factor ``g`` (checked against the bound)."""
        G = np.eye(self.n_u)
        if index != 0:
            if g is None:
                raise ValueError("a fault mode needs a realized fault factor")
            lo = self.mode_bounds[index].lower[index - 1, index - 1]
            hi = self.mode_bounds[index].upper[index - 1, index - 1]
            if not lo <= g <= hi:
                raise ValueError(f"fault factor {g} outside bound [{lo}, {hi}]")
            G[index - 1, index - 1] = g
        return TrueMode(index=index, G=G)


def step_plant(model: PlantModel, x, u, mode: TrueMode, w, v):
    """One plant step: returns ``(x_next, y)`` with ``y`` measured at ``x``.

    ``w`` and ``v`` must lie inside the model's disturbance and noise bounds.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    if not contains_point(model.W, w):
        raise ValueError("disturbance sample outside its bound")
    if not contains_point(model.V, v):
        raise ValueError("noise sample outside its bound")
    x_next = model.A @ x + model.B @ (mode.G @ u) + model.E @ w
    y = model.C @ x + model.F @ v
    return x_next, y


def sample_in_zonotope(z: Zonotope, rng: np.random.Generator) -> np.ndarray:
    """Draw ``c + H xi`` with ``xi`` uniform on ``[-1, 1]^r`` (deterministic per rng state)."""
    xi = rng.uniform(-1.0, 1.0, size=z.order)
    return z.center + z.generators @ xi
