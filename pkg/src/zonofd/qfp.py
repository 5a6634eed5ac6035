"""Quadratic fractional programming via Dinkelbach parametrization.

``min J_num(x) / J_den(x)`` is solved through the root of
``M(g) = min J_num(x) - g J_den(x)``: ``M`` is concave, strictly decreasing
and has a unique zero at the optimal ratio, so a bisection over a bracket
``[g_lo, g_hi]`` with ``M(g_lo) >= 0 >= M(g_hi)`` converges.  The inner
minimization is pluggable: the analytic solver below handles the
unconstrained case, module :mod:`zonofd.iqp` supplies the constrained one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend


class UnboundedBelowError(RuntimeError):
    """The inner problem has no finite minimum at the queried parameter."""


class BracketError(ValueError):
    """The supplied bracket does not enclose the root of M."""


class SolverError(RuntimeError):
    """Iteration limit or search failure in a solver loop."""


class QuadraticForm:
    """``x' quad x + lin x + const`` with a symmetrized quadratic part."""

    __slots__ = ("quad", "lin", "const")

    def __init__(self, quad, lin, const):
        q = np.asarray(quad, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError("quadratic part must be square")
        self.quad = 0.5 * (q + q.T)
        self.lin = np.asarray(lin, dtype=float).ravel()
        if self.lin.shape[0] != q.shape[0]:
            raise ValueError("linear part dimension mismatch")
        self.const = float(const)

    @property
    def dim(self) -> int:
        return self.quad.shape[0]

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.quad @ x + self.lin @ x + self.const)


class ParametricQFP:
    """Numerator/denominator pair and the shifted family ``O(g) = P - g Q``."""

    __slots__ = ("numerator", "denominator")

    def __init__(self, numerator: QuadraticForm, denominator: QuadraticForm):
        if numerator.dim != denominator.dim:
            raise ValueError("numerator and denominator dimension mismatch")
        self.numerator = numerator
        self.denominator = denominator

    @property
    def dim(self) -> int:
        return self.numerator.dim

    def shifted(self, gamma: float):
        """Coefficients of ``J_num - gamma * J_den``."""
        n, d = self.numerator, self.denominator
        return n.quad - gamma * d.quad, n.lin - gamma * d.lin, n.const - gamma * d.const

    def ratio(self, x) -> float:
        return self.numerator(x) / self.denominator(x)


@dataclass(frozen=True)
class GammaBracket:
    lo: float
    hi: float

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi):
            raise BracketError(f"invalid bracket [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class DinkelbachResult:
    gamma: float
    minimizer: np.ndarray
    m_value: float
    iterations: int


def m_of_gamma_unconstrained(p: ParametricQFP, gamma: float):
    """``(M(gamma), minimizer)`` for the unconstrained inner problem.

    ``O1(gamma)`` positive definite gives the closed form
    ``mu = -O1^{-1} O2' / 2`` and ``M = O3 - O2 O1^{-1} O2' / 4``.  A
    singular-but-PSD ``O1`` is handled through the pseudoinverse when the
    linear term lies in its range; otherwise the problem is unbounded below.
    """
    O1, O2, O3 = p.shifted(gamma)
    ok, val, mu = backend.chol_quad_min(O1, O2)
    if ok:
        return O3 + val, mu
    evals, evecs = np.linalg.eigh(O1)
    scale = max(1.0, float(np.max(np.abs(evals))))
    if evals[0] < -1e-10 * scale:
        raise UnboundedBelowError(f"O1({gamma}) is indefinite")
    null = evals < 1e-12 * scale
    proj = evecs[:, null].T @ O2
    if np.any(np.abs(proj) > 1e-9 * (1.0 + float(np.linalg.norm(O2)))):
        raise UnboundedBelowError(f"O1({gamma}) singular with linear term out of range")
    pos = ~null
    z = (evecs[:, pos].T @ O2) / evals[pos]
    mu = -0.5 * evecs[:, pos] @ z
    return O3 + float(O2 @ mu + mu @ O1 @ mu), mu


def psd_gamma_upper_bound(p: ParametricQFP, tol: float = 1e-9) -> float:
    """Largest ``g`` with ``P - g Q`` PSD, by bisection on the minimum eigenvalue."""
    P, Q = p.numerator.quad, p.denominator.quad
    p_min = float(np.linalg.eigvalsh(P)[0])
    if p_min < -1e-9 * (1.0 + float(np.max(np.abs(P)))):
        raise ValueError("numerator quadratic part must be PSD")
    if float(np.linalg.eigvalsh(Q)[-1]) <= 1e-14 * (1.0 + float(np.max(np.abs(Q)))):
        raise UnboundedBelowError("denominator quadratic has no positive eigenvalue: no finite bound")
    ok, gamma = backend.psd_gamma_upper(P, Q, tol)
    if not ok:
        raise UnboundedBelowError("no finite PSD bound found")
    return gamma


def dinkelbach_bisection(
    p: ParametricQFP,
    bracket: GammaBracket,
    eps: float = 1e-8,
    inner=None,
    max_iter: int = 200,
    check_bracket: bool = True,
) -> DinkelbachResult:
    """Bisect ``M`` over the bracket until ``|M(gamma)| <= eps``.

    ``inner(gamma) -> (M, minimizer)`` may raise
    :class:`UnboundedBelowError`, which counts as ``M < 0``.  With an
    approximate inner solver whose value error is below ``eps`` the true
    ``M`` at the returned point is within ``2 eps``.
    """
    if inner is None:
        fast = backend.dinkelbach_bisect(
            p.numerator.quad, p.numerator.lin, p.numerator.const,
            p.denominator.quad, p.denominator.lin, p.denominator.const,
            bracket.lo, bracket.hi, eps, max_iter,
        )
        status, gamma, mu, m_val, iters = fast
        if status == backend.OK:
            return DinkelbachResult(gamma, np.asarray(mu), float(m_val), iters)
        if status == backend.COLLAPSED and np.isfinite(m_val):
            # Bracket pinched against the PSD boundary: accept the last
            # analytic evaluation (common when M jumps to -inf past the bound).
            return DinkelbachResult(gamma, np.asarray(mu), float(m_val), iters)
        raise SolverError(f"unconstrained bisection failed with status {status}")

    def eval_m(g: float):
        try:
            return inner(g)
        except UnboundedBelowError:
            return -np.inf, None

    lo, hi = bracket.lo, bracket.hi
    if check_bracket:
        m_lo, mu_lo = eval_m(lo)
        if m_lo < -eps:
            raise BracketError(f"M(lo) = {m_lo} < 0")
        if abs(m_lo) <= eps and mu_lo is not None:
            return DinkelbachResult(lo, mu_lo, m_lo, 0)
        m_hi, mu_hi = eval_m(hi)
        if m_hi > eps:
            raise BracketError(f"M(hi) = {m_hi} > 0")
        if np.isfinite(m_hi) and abs(m_hi) <= eps and mu_hi is not None:
            return DinkelbachResult(hi, mu_hi, m_hi, 0)
    best = None
    for it in range(1, max_iter + 1):
        gamma = 0.5 * (lo + hi)
        m_val, mu = eval_m(gamma)
        if mu is not None:
            best = (gamma, mu, m_val)
            if abs(m_val) <= eps:
                return DinkelbachResult(gamma, mu, m_val, it)
        if m_val > 0.0:
            lo = gamma
        else:
            hi = gamma
        if hi - lo <= 4.0 * np.finfo(float).eps * max(1.0, abs(hi)):
            break
    if best is None:
        raise SolverError("bisection never obtained a finite inner value")
    gamma, mu, m_val = best
    return DinkelbachResult(gamma, mu, m_val, max_iter)


def gamma_interval_search(
    p: ParametricQFP,
    step: float,
    inner,
    max_steps: int = 10**6,
) -> GammaBracket:
    """March ``[0, step], [step, 2 step], ...`` until ``M`` turns nonpositive."""
    if step <= 0.0:
        raise ValueError("step must be positive")
    lo, hi = 0.0, step
    for _ in range(max_steps):
        try:
            m_hi, _ = inner(hi)
        except UnboundedBelowError:
            m_hi = -np.inf
        if m_hi <= 0.0:
            return GammaBracket(lo, hi)
        lo += step
        hi += step
    raise SolverError(f"no sign change within {max_steps} marching steps")
