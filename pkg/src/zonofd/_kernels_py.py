"""Pure-Python (numpy) implementations of the hot numerical kernels.

The compiled module ``zonofd._kernels`` mirrors these routines; the package
selects one of the two at import time (see :mod:`zonofd.backend`).  Keep the
iteration rules of both twins in lockstep: tests assert they agree.

Kernels
-------
chol_quad_min      unconstrained minimum of a PD quadratic via Cholesky
psd_gamma_upper    largest ``g`` with ``P - g Q`` PSD, by eigenvalue bisection
dinkelbach_bisect  bisection on ``M(g) = min x'O1(g)x + O2(g)x + O3(g)``
admm_qp            convex QP over (box in v) x (product of balls in mu = D v)
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

BACKEND_NAME = "python"

# status codes shared by both backends
OK = 0
MAX_ITER = 1
COLLAPSED = 2
PRUNED_LB = 3
SIGN_UB = 4

_PIVOT_REL = 1e-12


def chol_quad_min(O1: np.ndarray, O2: np.ndarray):
    """Minimize ``x' O1 x + O2 x`` for symmetric PD ``O1``.

    Returns ``(ok, value, minimizer)``; ``ok`` is False when factorization
    fails or a Cholesky pivot falls below ``1e-12`` times the largest
    diagonal entry (matrix not safely positive definite).
    """
    d = O1.shape[0]
    try:
        L = np.linalg.cholesky(O1)
    except np.linalg.LinAlgError:
        return False, 0.0, np.zeros(d)
    thresh = _PIVOT_REL * max(1e-300, float(np.max(np.abs(np.diag(O1)))))
    if float(np.min(np.diag(L)) ** 2) < thresh:
        return False, 0.0, np.zeros(d)
    rhs = -0.5 * np.asarray(O2, dtype=float).ravel()
    z = solve_triangular(L, rhs, lower=True, check_finite=False)
    mu = solve_triangular(L.T, z, lower=False, check_finite=False)
    return True, -float(z @ z), mu


def psd_gamma_upper(P: np.ndarray, Q: np.ndarray, tol: float = 1e-9):
    """Largest ``g >= 0`` with ``P - g Q`` PSD, bisected to absolute ``tol``.

    Returns ``(ok, gamma)``; ``ok`` is False when no finite bound is found
    within the growth cap (caller should have verified that Q has a positive
    eigenvalue).
    """
    scale_p = float(np.max(np.abs(P))) + 1.0
    scale_q = float(np.max(np.abs(Q))) + 1.0

    def is_psd(g: float) -> bool:
        return float(np.linalg.eigvalsh(P - g * Q)[0]) >= -1e-12 * (scale_p + g * scale_q)

    lo, hi = 0.0, 1.0
    grow = 0
    while is_psd(hi):
        lo = hi
        hi *= 2.0
        grow += 1
        if grow > 100:
            return False, lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if is_psd(mid):
            lo = mid
        else:
            hi = mid
    return True, lo


def dinkelbach_bisect(P1, P2, P3, Q1, Q2, Q3, lo, hi, tol, max_iter=200):
    """Bisection for the root of ``M(g)`` with the analytic inner solver.

    A non-PD ``O1(g)`` means the inner problem is unbounded below
    (``M(g) = -inf``) and moves the upper bracket end.  Returns
    ``(status, gamma, minimizer, m_value, iterations)``; on COLLAPSED /
    MAX_ITER the best evaluated point is returned (m_value is NaN if no
    point was ever PD).
    """
    best = None
    it = 0
    status = MAX_ITER
    for it in range(1, max_iter + 1):
        gamma = 0.5 * (lo + hi)
        ok, val, mu = chol_quad_min(P1 - gamma * Q1, P2 - gamma * Q2)
        if ok:
            m_val = (P3 - gamma * Q3) + val
            best = (gamma, mu, m_val)
            if abs(m_val) <= tol:
                return OK, gamma, mu, m_val, it
            if m_val > 0.0:
                lo = gamma
            else:
                hi = gamma
        else:
            hi = gamma
        if hi - lo <= 4.0 * np.finfo(float).eps * max(1.0, abs(hi)):
            status = COLLAPSED
            break
    if best is None:
        return COLLAPSED, 0.5 * (lo + hi), np.zeros(P1.shape[0]), np.nan, it
    gamma, mu, m_val = best
    return status, gamma, mu, m_val, it


def _project_blocks(p, starts, lens, kinds, radii, centers_full, vmats, svals):
    out = p.copy()
    for b in range(len(starts)):
        s = starts[b]
        ln = lens[b]
        pb = p[s : s + ln]
        cb = centers_full[s : s + ln]
        r = radii[b]
        if kinds[b] == 0:
            diff = pb - cb
            nrm = float(np.linalg.norm(diff))
            if nrm > r:
                out[s : s + ln] = cb + diff * ((r * (1.0 - 1e-14)) / nrm)
        else:
            V = vmats[b]
            w = svals[b] ** 2
            q = V.T @ (pb - cb)
            val = float(np.sum(w * q * q))
            r2 = r * r
            if val > r2:
                lam = 0.0
                for _ in range(80):
                    den = 1.0 + lam * w
                    f = float(np.sum(w * q * q / den**2)) - r2
                    if f <= 1e-13 * r2:
                        break
                    fp = -2.0 * float(np.sum(w * w * q * q / den**3))
                    lam -= f / fp
                y = q / (1.0 + lam * w)
                val2 = float(np.sum(w * y * y))
                if val2 > r2:
                    y *= (r / np.sqrt(val2)) * (1.0 - 1e-14)
                out[s : s + ln] = cb + V @ y
    return out


def _support_blocks(y, starts, lens, kinds, radii, centers_full, vmats, svals):
    total = 0.0
    for b in range(len(starts)):
        s = starts[b]
        ln = lens[b]
        yb = y[s : s + ln]
        cb = centers_full[s : s + ln]
        if kinds[b] == 0:
            total += float(yb @ cb) + radii[b] * float(np.linalg.norm(yb))
        else:
            q = vmats[b].T @ yb
            total += float(yb @ cb) + radii[b] * float(np.linalg.norm(q / svals[b]))
    return total


def _box_lin_quad_min(theta, c, box_lo, box_hi):
    """Sum over coordinates of ``min theta v^2 + c v`` on ``[lo, hi]``, theta >= 0."""
    pos = theta > 0.0
    stationary = np.zeros_like(theta)
    np.divide(-c, 2.0 * theta, out=stationary, where=pos)
    flat = np.where(c >= 0.0, box_lo, box_hi)
    v = np.where(pos, np.clip(stationary, box_lo, box_hi), flat)
    return float(np.sum(theta * v * v + c * v))


def _dual_lb(theta, lin, const, box_lo, box_hi, D, lam, rho, starts, lens, kinds, radii, centers_full, vmats, svals):
    y = rho * lam
    cy = lin + D.T @ y
    return (
        _box_lin_quad_min(theta, cy, box_lo, box_hi)
        + const
        - _support_blocks(y, starts, lens, kinds, radii, centers_full, vmats, svals)
    )


def admm_qp(
    D,
    theta,
    lin,
    const,
    box_lo,
    box_hi,
    starts,
    lens,
    kinds,
    radii,
    centers_full,
    vmats,
    svals,
    rho,
    tol,
    max_iter,
    lb_stop=np.inf,
    ub_stop=-np.inf,
    v0=None,
    lam0=None,
):
    """ADMM for ``min theta.v^2 + lin.v + const`` over ``v in box, D v in S``.

    ``S`` is a product of per-block balls/ellipsoids acting on ``mu = D v``
    (``D`` orthogonal, ``theta >= 0`` coordinatewise, finite box).  A
    certified dual lower bound is refreshed every 16 iterations; the solve
    stops early once the bound exceeds ``lb_stop`` (caller prunes the node;
    this also catches infeasible box/ball combinations, whose dual diverges)
    or the feasible value drops below ``ub_stop`` (sign certified).

    Returns ``(v, mu, lam, ub, lb, status, iterations)``: ``mu`` is exactly
    feasible for the blocks; ``ub`` is the objective at ``clip(D' mu, box)``
    and is ``+inf`` whenever that point's box violation exceeds the feasible
    fuzz (so a non-converged or infeasible solve never produces a bogus
    incumbent).
    """

    def value_at_mu(mu_vec):
        v_raw = D.T @ mu_vec
        viol = float(np.max(np.maximum(box_lo - v_raw, v_raw - box_hi), initial=0.0))
        v_ub = np.clip(v_raw, box_lo, box_hi)
        if viol > 100.0 * tol * (1.0 + float(np.max(np.abs(v_ub)))):
            return v_ub, np.inf
        return v_ub, float(theta @ (v_ub * v_ub) + lin @ v_ub + const)

    d = theta.shape[0]
    v = np.zeros(d) if v0 is None else np.asarray(v0, dtype=float).copy()
    lam = np.zeros(d) if lam0 is None else np.asarray(lam0, dtype=float).copy()
    mu = _project_blocks(D @ v, starts, lens, kinds, radii, centers_full, vmats, svals)
    lb_best = -np.inf
    status = MAX_ITER
    it = 0
    denom = 2.0 * theta + rho
    for it in range(1, max_iter + 1):
        dtw = D.T @ (mu - lam)
        v = np.clip((rho * dtw - lin) / denom, box_lo, box_hi)
        dv = D @ v
        mu_prev = mu
        mu = _project_blocks(dv + lam, starts, lens, kinds, radii, centers_full, vmats, svals)
        lam = lam + dv - mu
        rp = float(np.max(np.abs(dv - mu)))
        rd = rho * float(np.max(np.abs(mu - mu_prev)))
        converged = rp <= tol * (1.0 + float(np.max(np.abs(v)))) and rd <= tol * (
            1.0 + rho * float(np.max(np.abs(lam)))
        )
        if converged or (it & 15) == 0:
            lb = _dual_lb(
                theta, lin, const, box_lo, box_hi, D, lam, rho,
                starts, lens, kinds, radii, centers_full, vmats, svals,
            )
            if lb > lb_best:
                lb_best = lb
            v_ub, ub = value_at_mu(mu)
            if lb_best > lb_stop:
                return v_ub, mu, lam, ub, lb_best, PRUNED_LB, it
            if ub < ub_stop:
                return v_ub, mu, lam, ub, lb_best, SIGN_UB, it
            if converged:
                return v_ub, mu, lam, ub, lb_best, OK, it
        if (it & 31) == 0:
            if rp > 10.0 * rd and rho < 1e8:
                rho *= 2.0
                lam *= 0.5
                denom = 2.0 * theta + rho
            elif rd > 10.0 * rp and rho > 1e-8:
                rho *= 0.5
                lam *= 2.0
                denom = 2.0 * theta + rho
    v_ub, ub = value_at_mu(mu)
    lb = _dual_lb(
        theta, lin, const, box_lo, box_hi, D, lam, rho,
        starts, lens, kinds, radii, centers_full, vmats, svals,
    )
    lb_best = max(lb_best, lb)
    return v_ub, mu, lam, ub, lb_best, status, it
