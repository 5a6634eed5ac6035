"""Joint gain-and-input design for active fault diagnosis.

Alongside each observer, an open-loop auxiliary set dynamics is propagated
per mode with the fault channel inflated by ``1 + eps2``.  The Minkowski
difference of the two (the exclusion set) must contain the origin while the
hypothesized mode matches the plant, and its excluding degree is an explicit
quadratic fractional function of all gains and the input jointly, because
the measurement at the next step never enters.  Maximizing the mode-weighted
total excluding degree yields the joint design.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import iqp
from .observer import SVOState
from .pfd import vec
from .plant import PlantModel
from .qfp import (
    GammaBracket,
    ParametricQFP,
    QuadraticForm,
    UnboundedBelowError,
    dinkelbach_bisection,
    gamma_interval_search,
    m_of_gamma_unconstrained,
    psd_gamma_upper_bound,
)
from .setops import Zonotope, excluding_degree, reduce_order

# An exclusion set is an ordinary zonotope in state space.
ExclusionSet = Zonotope


@dataclass(frozen=True)
class AuxSetBank:
    """One open-loop state set per mode."""

    sets: tuple[Zonotope, ...]

    def __post_init__(self):
        if not self.sets:
            raise ValueError("empty bank")
        dim = self.sets[0].dim
        if any(z.dim != dim for z in self.sets):
            raise ValueError("bank sets must share the state dimension")

    def __getitem__(self, i: int) -> Zonotope:
        return self.sets[i]

    def __len__(self) -> int:
        return len(self.sets)


@dataclass(frozen=True)
class ModeWeights:
    """Normalized relative importance of each mode for the joint objective."""

    sigma: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sigma, dtype=float)
        if np.any(s < -1e-15) or abs(float(s.sum()) - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "sigma", s)

    @classmethod
    def uniform(cls, n_modes: int) -> "ModeWeights":
        return cls(np.full(n_modes, 1.0 / n_modes))


@dataclass(frozen=True)
class StackedLayout:
    """Index bookkeeping for ``mu = [vec(L_0); ...; vec(L_nu); u]``."""

    n_x: int
    n_y: int
    n_u: int

    @property
    def n_modes(self) -> int:
        return self.n_u + 1

    @property
    def gain_size(self) -> int:
        return self.n_x * self.n_y

    @property
    def dim(self) -> int:
        return self.n_modes * self.gain_size + self.n_u

    def gain_block(self, i: int) -> tuple[int, int]:
        return i * self.gain_size, (i + 1) * self.gain_size

    @property
    def input_block(self) -> tuple[int, int]:
        return self.n_modes * self.gain_size, self.dim

    def stack(self, gains, u) -> np.ndarray:
        if len(gains) != self.n_modes:
            raise ValueError(f"expected {self.n_modes} gains")
        parts = [vec(g) for g in gains]
        parts.append(np.asarray(u, dtype=float))
        mu = np.concatenate(parts)
        if mu.shape[0] != self.dim:
            raise ValueError("stacked vector has wrong length")
        return mu

    def unstack(self, mu) -> tuple[list[np.ndarray], np.ndarray]:
        mu = np.asarray(mu, dtype=float)
        if mu.shape[0] != self.dim:
            raise ValueError("stacked vector has wrong length")
        gains = []
        for i in range(self.n_modes):
            s, e = self.gain_block(i)
            gains.append(mu[s:e].reshape((self.n_x, self.n_y), order="F"))
        return gains, mu[self.input_block[0] :].copy()


def _aux_fault_term(model: PlantModel, mode: int, u, eps1: float, eps2: float):
    """(index, center coefficient, generator coefficient) of the inflated channel."""
    idx, mid, rad = model.fault_term(mode, eps1)
    if idx is None:
        return None, None, None
    scale = 1.0 + eps2
    col = model.B[:, idx] * u[idx]
    return idx, (scale * mid - 1.0) * col, scale * rad * col


def step_aux_bank(
    model: PlantModel,
    bank: AuxSetBank,
    u,
    eps1: float,
    eps2: float,
    reduction_order: int | None = 20,
) -> AuxSetBank:
    """Propagate every mode's open-loop set one step.

    Healthy mode: ``A X (+) B u (+) E W``.  Fault modes scale the fault
    channel's interval by ``1 + eps2`` before the segment enclosure; without
    the inflation the input would drop out of the joint design entirely.
    """
    if eps2 <= 0.0:
        raise ValueError("eps2 must be positive (joint design needs the inflated channel)")
    u = np.asarray(u, dtype=float)
    A, B, E = model.A, model.B, model.E
    out = []
    for i, z in enumerate(bank.sets):
        center = A @ z.center + B @ u + E @ model.W.center
        blocks = [A @ z.generators]
        if i != 0:
            _, c_adj, g_col = _aux_fault_term(model, i, u, eps1, eps2)
            center = center + c_adj
            blocks.append(g_col.reshape(-1, 1))
        blocks.append(E @ model.W.generators)
        nxt = Zonotope(center, np.hstack(blocks))
        if reduction_order is not None:
            nxt = reduce_order(nxt, reduction_order)
        out.append(nxt)
    return AuxSetBank(tuple(out))


def build_exclusion_set(
    model: PlantModel,
    aux: Zonotope,
    obs: SVOState,
    gain,
    u,
    y_k,
    eps1: float,
    eps2: float,
) -> ExclusionSet:
    """Exclusion set for one mode from the time-k sets, gain and input.

    Center ``A x_aux - (A - L C) x_obs + eps2 mid_i B e_i u_i - L y + L F eta_c``
    and generators ``[A H_aux, -(A - L C) H_obs, L F H_eta, fault column]``;
    the input-dependent pieces are absent in the healthy mode.
    """
    u = np.asarray(u, dtype=float)
    y_k = np.asarray(y_k, dtype=float)
    L = np.asarray(gain, dtype=float)
    A, C, F = model.A, model.C, model.F
    AL = A - L @ C
    center = A @ aux.center - AL @ obs.xhat.center - L @ y_k + L @ (F @ model.V.center)
    blocks = [A @ aux.generators, -AL @ obs.xhat.generators, L @ (F @ model.V.generators)]
    if obs.mode != 0:
        idx, mid, rad = model.fault_term(obs.mode, eps1)
        col = model.B[:, idx] * u[idx]
        center = center + eps2 * mid * col
        blocks.append((eps2 * rad * col).reshape(-1, 1))
    return Zonotope(center, np.hstack(blocks))


def mode_weights(exclusion_sets) -> ModeWeights:
    """Weights proportional to each exclusion set's excluding degree.

    A mode whose set decisively excludes the origin is likely not the true
    one and gets pushed harder.  All-zero degrees (every set origin-centered)
    fall back to uniform weights.
    """
    degrees = np.array([excluding_degree(z) for z in exclusion_sets])
    total = float(degrees.sum())
    if total <= 0.0:
        return ModeWeights.uniform(len(exclusion_sets))
    return ModeWeights(degrees / total)


def build_joint_problem(
    model: PlantModel,
    bank: AuxSetBank,
    observers: list[SVOState],
    weights: ModeWeights,
    y_k,
    eps1: float,
    eps2: float,
) -> tuple[ParametricQFP, StackedLayout]:
    """Total-excluding-degree fractional program in the stacked variable.

    Numerator: weighted exclusion-set sizes.  Denominator: weighted squared
    center norms.  The input couples to each fault mode's gain block through
    the inflated fault channel, which is what makes the joint design genuinely
    joint.
    """
    if eps2 <= 0.0:
        raise ValueError("eps2 must be positive")
    y_k = np.asarray(y_k, dtype=float)
    layout = StackedLayout(n_x=model.n_x, n_y=model.n_y, n_u=model.n_u)
    if len(observers) != layout.n_modes or len(bank) != layout.n_modes:
        raise ValueError("need one observer and one auxiliary set per mode")
    dim = layout.dim
    A, C, F = model.A, model.C, model.F
    FHe = F @ model.V.generators
    eta_c = model.V.center
    u_off = layout.input_block[0]

    P4 = np.zeros((dim, dim))
    P5 = np.zeros(dim)
    P6 = 0.0
    Q4 = np.zeros((dim, dim))
    Q5 = np.zeros(dim)
    Q6 = 0.0
    eye_x = np.eye(model.n_x)

    for i in range(layout.n_modes):
        sigma = float(weights.sigma[i])
        obs = observers[i]
        if obs.mode != i:
            raise ValueError("observer bank must be ordered by mode")
        s, e = layout.gain_block(i)
        Hhat = obs.xhat.generators
        xhat = obs.xhat.center
        Haux = bank[i].generators
        xaux = bank[i].center
        a_i = A @ (xaux - xhat)
        beta = C @ xhat + F @ eta_c - y_k

        CH = C @ Hhat
        P4[s:e, s:e] += sigma * np.kron(CH @ CH.T + FHe @ FHe.T, eye_x)
        P5[s:e] += -2.0 * sigma * vec(A @ Hhat @ CH.T)
        P6 += sigma * (float(np.sum((A @ Hhat) ** 2)) + float(np.sum((A @ Haux) ** 2)))

        Q4[s:e, s:e] += sigma * np.kron(np.outer(beta, beta), eye_x)
        Q5[s:e] += 2.0 * sigma * vec(np.outer(a_i, beta))
        Q6 += sigma * float(a_i @ a_i)

        if i != 0:
            idx, mid, rad = model.fault_term(i, eps1)
            c_vec = eps2 * mid * model.B[:, idx]
            r_vec = eps2 * rad * model.B[:, idx]
            col = u_off + idx
            P4[col, col] += sigma * float(r_vec @ r_vec)
            Q4[col, col] += sigma * float(c_vec @ c_vec)
            coupling = sigma * np.kron(beta, c_vec)
            Q4[s:e, col] += coupling
            Q4[col, s:e] += coupling
            Q5[col] += 2.0 * sigma * float(a_i @ c_vec)

    qfp = ParametricQFP(QuadraticForm(P4, P5, P6), QuadraticForm(Q4, Q5, Q6))
    return qfp, layout


@dataclass(frozen=True)
class JointDesign:
    gains: list[np.ndarray]
    u: np.ndarray
    gamma: float
    m_value: float


def joint_constraints(
    model: PlantModel,
    layout: StackedLayout,
    eps3: float,
    u_center,
    u_radius: float,
) -> list[iqp.BallConstraint]:
    """Stability ball per gain block plus the input energy ball."""
    cons = [
        iqp.stability_ball(model.A, model.C, eps3, block=layout.gain_block(i))
        for i in range(layout.n_modes)
    ]
    cons.append(iqp.input_ball(np.asarray(u_center, dtype=float), u_radius, layout.input_block))
    return cons


def design_joint(
    problem: ParametricQFP,
    layout: StackedLayout,
    constraints: list[iqp.BallConstraint] | None = None,
    *,
    eps: float = 1e-8,
    prev_gamma: float | None = None,
    m: int = 16,
    solver_options: dict | None = None,
) -> JointDesign:
    """Solve the joint fractional program and unstack gains and input."""
    if constraints is None:
        try:
            gamma_bar = psd_gamma_upper_bound(problem)
        except UnboundedBelowError as exc:
            raise iqp.SolverError(str(exc)) from exc
        try:
            m_bar, _ = m_of_gamma_unconstrained(problem, gamma_bar)
        except UnboundedBelowError:
            m_bar = -np.inf
        if m_bar > eps:
            bracket = gamma_interval_search(
                problem, gamma_bar, lambda g: m_of_gamma_unconstrained(problem, g)
            )
        else:
            bracket = GammaBracket(0.0, gamma_bar)
        res = dinkelbach_bisection(problem, bracket, eps=eps)
    else:
        inner = iqp.ConstrainedInner(
            problem, constraints, m=m, gap=eps / 2, **(solver_options or {})
        )
        step = prev_gamma if prev_gamma and prev_gamma > eps else None
        if step is None:
            try:
                step = max(psd_gamma_upper_bound(problem), 10.0 * eps)
            except UnboundedBelowError:
                step = 1.0
        bracket = gamma_interval_search(problem, step, inner)
        res = dinkelbach_bisection(problem, bracket, eps=eps / 2, inner=inner, check_bracket=False)
    gains, u = layout.unstack(res.minimizer)
    return JointDesign(gains=gains, u=u, gamma=res.gamma, m_value=res.m_value)
