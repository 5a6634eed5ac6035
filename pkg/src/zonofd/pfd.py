"""Per-observer optimal gain design for passive fault diagnosis.

With the input already injected and the next measurement in hand, the
reciprocal excluding degree of the next residual is an explicit quadratic
fractional function of the vectorized gain.  This module assembles that
fractional program and solves it, unconstrained (analytic inner solver) or
inside the observer-stability ball (constrained inner solver from
:mod:`zonofd.iqp`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import iqp
from .observer import SVOState
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


class DegenerateDesignError(RuntimeError):
    """The denominator of the design objective vanishes; reuse the last gain."""


def vec(mat: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(mat, dtype=float).flatten(order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape((rows, cols), order="F")


@dataclass(frozen=True)
class PfdProblem:
    """Fractional program in the vectorized gain of one observer."""

    qfp: ParametricQFP
    mode: int
    n_x: int
    n_y: int

    @property
    def dim(self) -> int:
        return self.n_x * self.n_y


def build_pfd_problem(
    model: PlantModel,
    obs: SVOState,
    u_k,
    y_k,
    y_next,
    eps1: float,
) -> PfdProblem:
    """Assemble numerator (residual size) and denominator (residual center).

    Numerator ``J1 = ||H_resid||_F^2`` and denominator ``J2 = ||r_center||^2``
    as quadratics in ``vec(L)``; minimizing ``J1/J2`` maximizes the excluding
    degree of the next residual.
    """
    u = np.asarray(u_k, dtype=float)
    y_k = np.asarray(y_k, dtype=float)
    y_next = np.asarray(y_next, dtype=float)
    A, B, C, E, F = model.A, model.B, model.C, model.E, model.F
    Hx = obs.xhat.generators
    xc = obs.xhat.center
    H_eta = model.V.generators
    eta_c = model.V.center
    H_w = model.W.generators
    w_c = model.W.center

    CH = C @ Hx
    FHe = F @ H_eta
    CtC = C.T @ C
    gram_h = CH @ CH.T + FHe @ FHe.T
    P1 = np.kron(gram_h, CtC)
    CAH = C @ A @ Hx
    P2 = -2.0 * vec(CtC @ A @ Hx @ CH.T)
    idx, mid, rad = model.fault_term(obs.mode, eps1)
    if idx is None:
        fault_vec = np.zeros(model.n_x)
        mid_bu = B @ u
    else:
        fault_vec = rad * B[:, idx] * u[idx]
        mid_bu = B @ u + (mid - 1.0) * B[:, idx] * u[idx]
    P3 = (
        float(np.sum(CAH**2))
        + float(np.sum((C @ E @ H_w) ** 2))
        + float(np.sum((C @ fault_vec) ** 2))
        + float(np.sum(FHe**2))
    )

    beta = C @ xc - y_k + F @ eta_c
    alpha = y_next - C @ A @ xc - C @ mid_bu - C @ E @ w_c - F @ eta_c
    Q1 = np.kron(np.outer(beta, beta), CtC)
    Q2 = 2.0 * vec(np.outer(C.T @ alpha, beta))
    Q3 = float(alpha @ alpha)

    qfp = ParametricQFP(
        QuadraticForm(P1, P2, P3),
        QuadraticForm(Q1, Q2, Q3),
    )
    return PfdProblem(qfp=qfp, mode=obs.mode, n_x=model.n_x, n_y=model.n_y)


@dataclass(frozen=True)
class GainDesign:
    gain: np.ndarray
    gamma: float
    m_value: float
    fallback: bool = False


def design_pfd_gain(
    problem: PfdProblem,
    constraint: iqp.BallConstraint | None = None,
    *,
    eps: float = 1e-8,
    prev_gamma: float | None = None,
    m: int = 16,
    reltol_denominator: float = 1e-12,
    solver_options: dict | None = None,
) -> GainDesign:
    """Solve the fractional program and invert the vectorization.

    Unconstrained: bracket ``[0, psd-bound]`` with the analytic inner solver
    (falling back to interval marching when the bound does not bracket the
    root).  Constrained: interval marching with step ``prev_gamma`` (the PSD
    bound at the first step) and the piecewise-relaxation inner solver; the
    returned gain then satisfies the stability ball exactly.
    """
    p = problem.qfp
    if constraint is None:
        try:
            gamma_bar = psd_gamma_upper_bound(p)
        except UnboundedBelowError as exc:
            raise DegenerateDesignError(str(exc)) from exc
        if gamma_bar <= 0.0:
            raise DegenerateDesignError("PSD bound collapsed to zero")
        try:
            m_bar, _ = m_of_gamma_unconstrained(p, gamma_bar)
        except UnboundedBelowError:
            m_bar = -np.inf
        if m_bar > eps:
            bracket = gamma_interval_search(
                p, gamma_bar, lambda g: m_of_gamma_unconstrained(p, g)
            )
        else:
            bracket = GammaBracket(0.0, gamma_bar)
        res = dinkelbach_bisection(p, bracket, eps=eps)
    else:
        inner = iqp.ConstrainedInner(p, [constraint], m=m, gap=eps / 2, **(solver_options or {}))
        step = prev_gamma if prev_gamma and prev_gamma > eps else None
        if step is None:
            try:
                step = max(psd_gamma_upper_bound(p), 10.0 * eps)
            except UnboundedBelowError:
                step = 1.0
        bracket = gamma_interval_search(p, step, inner)
        res = dinkelbach_bisection(p, bracket, eps=eps / 2, inner=inner, check_bracket=False)
    denom = p.denominator(res.minimizer)
    scale = abs(p.numerator(res.minimizer)) + abs(p.numerator.const) + 1.0
    if denom <= reltol_denominator * scale:
        raise DegenerateDesignError("objective denominator vanished at the optimum")
    gain = unvec(res.minimizer, problem.n_x, problem.n_y)
    return GainDesign(gain=gain, gamma=res.gamma, m_value=res.m_value)
