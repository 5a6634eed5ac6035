# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the hot numerical kernels (see _kernels_py for the
reference implementations; iteration rules must stay in lockstep)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, fabs, isfinite, sqrt
from scipy.linalg.cython_lapack cimport dsyev

cnp.import_array()

BACKEND_NAME = "cython"

OK = 0
MAX_ITER = 1
COLLAPSED = 2
PRUNED_LB = 3
SIGN_UB = 4

cdef int C_OK = 0
cdef int C_MAX_ITER = 1
cdef int C_COLLAPSED = 2
cdef int C_PRUNED_LB = 3
cdef int C_SIGN_UB = 4

cdef double _PIVOT_REL = 1e-12


cdef int _chol_inplace(double[:, ::1] L, int d, double thresh) noexcept nogil:
    """Lower Cholesky in place; nonzero return means a pivot fell below thresh."""
    cdef int i, j, k
    cdef double acc, pivot
    for j in range(d):
        acc = L[j, j]
        for k in range(j):
            acc -= L[j, k] * L[j, k]
        if acc < thresh:
            return 1
        pivot = sqrt(acc)
        L[j, j] = pivot
        for i in range(j + 1, d):
            acc = L[i, j]
            for k in range(j):
                acc -= L[i, k] * L[j, k]
            L[i, j] = acc / pivot
    return 0


cdef void _forward_solve(double[:, ::1] L, double[::1] rhs, double[::1] z, int d) noexcept nogil:
    cdef int i, k
    cdef double acc
    for i in range(d):
        acc = rhs[i]
        for k in range(i):
            acc -= L[i, k] * z[k]
        z[i] = acc / L[i, i]


cdef void _backward_solve(double[:, ::1] L, double[::1] z, double[::1] x, int d) noexcept nogil:
    cdef int i, k
    cdef double acc
    for i in range(d - 1, -1, -1):
        acc = z[i]
        for k in range(i + 1, d):
            acc -= L[k, i] * x[k]
        x[i] = acc / L[i, i]


def chol_quad_min(O1, O2):
    """Minimize ``x' O1 x + O2 x`` for symmetric PD ``O1`` (see python twin)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a = np.array(O1, dtype=np.float64, order="C")
    cdef int d = a.shape[0]
    cdef double thresh = 0.0
    cdef int j
    for j in range(d):
        if fabs(a[j, j]) > thresh:
            thresh = fabs(a[j, j])
    thresh = _PIVOT_REL * (thresh if thresh > 1e-300 else 1e-300)
    cdef double[:, ::1] L = a
    if _chol_inplace(L, d, thresh):
        return False, 0.0, np.zeros(d)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rhs = -0.5 * np.asarray(O2, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] z = np.empty(d)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] mu = np.empty(d)
    _forward_solve(L, rhs, z, d)
    _backward_solve(L, z, mu, d)
    cdef double val = 0.0
    for j in range(d):
        val += z[j] * z[j]
    return True, -val, mu


cdef double _min_eig(double[:, ::1] A, int d, double* work, int lwork, double* evals) noexcept nogil:
    cdef int info = 0
    cdef int n = d
    cdef int lda = d
    cdef int lw = lwork
    # dsyev overwrites its input; A must already hold a scratch copy
    dsyev("N", "L", &n, &A[0, 0], &lda, evals, work, &lw, &info)
    if info != 0:
        return -INFINITY
    cdef double smallest = evals[0]
    cdef int i
    for i in range(1, d):
        if evals[i] < smallest:
            smallest = evals[i]
    return smallest


def psd_gamma_upper(P, Q, double tol=1e-9):
    """Largest ``g >= 0`` with ``P - g Q`` PSD (see python twin)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Pa = np.array(P, dtype=np.float64, order="C")
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Qa = np.array(Q, dtype=np.float64, order="C")
    cdef int d = Pa.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] scratch = np.empty((d, d))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] evals = np.empty(d)
    cdef int lwork = 3 * d + 2
    cdef cnp.ndarray[cnp.float64_t, ndim=1] work = np.empty(lwork)
    cdef double scale_p = float(np.max(np.abs(Pa))) + 1.0
    cdef double scale_q = float(np.max(np.abs(Qa))) + 1.0
    cdef double[:, ::1] Pv = Pa
    cdef double[:, ::1] Qv = Qa
    cdef double[:, ::1] Sv = scratch
    cdef double[::1] wv = work
    cdef double[::1] ev = evals

    cdef int i, j

    cdef double lo = 0.0, hi = 1.0, mid
    cdef int grow = 0
    cdef double eig
    while True:
        for i in range(d):
            for j in range(d):
                Sv[i, j] = Pv[i, j] - hi * Qv[i, j]
        eig = _min_eig(Sv, d, &wv[0], lwork, &ev[0])
        if eig < -1e-12 * (scale_p + hi * scale_q):
            break
        lo = hi
        hi *= 2.0
        grow += 1
        if grow > 100:
            return False, lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        for i in range(d):
            for j in range(d):
                Sv[i, j] = Pv[i, j] - mid * Qv[i, j]
        eig = _min_eig(Sv, d, &wv[0], lwork, &ev[0])
        if eig >= -1e-12 * (scale_p + mid * scale_q):
            lo = mid
        else:
            hi = mid
    return True, lo


def dinkelbach_bisect(P1, P2, P3, Q1, Q2, Q3, double lo, double hi, double tol, int max_iter=200):
    """Bisection for the root of ``M(g)`` (see python twin)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] P1a = np.array(P1, dtype=np.float64, order="C")
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Q1a = np.array(Q1, dtype=np.float64, order="C")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] P2a = np.asarray(P2, dtype=np.float64).ravel().copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] Q2a = np.asarray(Q2, dtype=np.float64).ravel().copy()
    cdef double P3d = float(P3), Q3d = float(Q3)
    cdef int d = P1a.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] O1 = np.empty((d, d))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rhs = np.empty(d)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] z = np.empty(d)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] best_mu = np.zeros(d)
    cdef double[:, ::1] P1v = P1a
    cdef double[:, ::1] Q1v = Q1a
    cdef double[::1] P2v = P2a
    cdef double[::1] Q2v = Q2a
    cdef double[:, ::1] O1v = O1
    cdef double[::1] rhsv = rhs
    cdef double[::1] zv = z

    cdef double best_gamma = 0.0, best_m = 0.0
    cdef bint have_best = False
    cdef double gamma, m_val, thresh, val, eps_mach
    cdef int it = 0, i, j, status = MAX_ITER
    eps_mach = np.finfo(float).eps

    for it in range(1, max_iter + 1):
        gamma = 0.5 * (lo + hi)
        thresh = 0.0
        for i in range(d):
            for j in range(d):
                O1v[i, j] = P1v[i, j] - gamma * Q1v[i, j]
            if fabs(O1v[i, i]) > thresh:
                thresh = fabs(O1v[i, i])
            rhsv[i] = -0.5 * (P2v[i] - gamma * Q2v[i])
        thresh = _PIVOT_REL * (thresh if thresh > 1e-300 else 1e-300)
        if _chol_inplace(O1v, d, thresh):
            hi = gamma
        else:
            _forward_solve(O1v, rhsv, zv, d)
            val = 0.0
            for i in range(d):
                val += zv[i] * zv[i]
            m_val = (P3d - gamma * Q3d) - val
            best_gamma = gamma
            best_m = m_val
            _backward_solve(O1v, zv, best_mu, d)
            have_best = True
            if fabs(m_val) <= tol:
                return OK, gamma, best_mu, m_val, it
            if m_val > 0.0:
                lo = gamma
            else:
                hi = gamma
        if hi - lo <= 4.0 * eps_mach * (1.0 if fabs(hi) < 1.0 else fabs(hi)):
            status = COLLAPSED
            break
    if not have_best:
        return COLLAPSED, 0.5 * (lo + hi), np.zeros(d), np.nan, it
    return status, best_gamma, best_mu, best_m, it


# --------------------------------------------------------------------------
# ADMM kernel

cdef void _matvec(double[:, ::1] A, double[::1] x, double[::1] out, int d, bint trans) noexcept nogil:
    cdef int i, j
    cdef double acc
    if trans:
        for i in range(d):
            acc = 0.0
            for j in range(d):
                acc += A[j, i] * x[j]
            out[i] = acc
    else:
        for i in range(d):
            acc = 0.0
            for j in range(d):
                acc += A[i, j] * x[j]
            out[i] = acc


cdef void _project_blocks_c(
    double[::1] p, double[::1] out,
    long[::1] starts, long[::1] lens, long[::1] kinds, double[::1] radii,
    double[::1] centers, double[::1] vflat, long[::1] voffs,
    double[::1] wflat, long[::1] woffs,
    double[::1] q, double[::1] y,
) noexcept nogil:
    cdef int nb = starts.shape[0]
    cdef int b, s, ln, i, j, newton
    cdef double r, r2, nrm, val, lam, f, fp, den, scalev
    cdef long vo, wo
    for b in range(nb):
        s = <int> starts[b]
        ln = <int> lens[b]
        r = radii[b]
        if kinds[b] == 0:
            nrm = 0.0
            for i in range(ln):
                val = p[s + i] - centers[s + i]
                nrm += val * val
            nrm = sqrt(nrm)
            if nrm > r:
                scalev = (r * (1.0 - 1e-14)) / nrm
                for i in range(ln):
                    out[s + i] = centers[s + i] + (p[s + i] - centers[s + i]) * scalev
            else:
                for i in range(ln):
                    out[s + i] = p[s + i]
        else:
            vo = voffs[b]
            wo = woffs[b]
            r2 = r * r
            # q = V'(p - c)
            for i in range(ln):
                val = 0.0
                for j in range(ln):
                    val += vflat[vo + j * ln + i] * (p[s + j] - centers[s + j])
                q[i] = val
            val = 0.0
            for i in range(ln):
                val += wflat[wo + i] * q[i] * q[i]
            if val <= r2:
                for i in range(ln):
                    out[s + i] = p[s + i]
                continue
            lam = 0.0
            for newton in range(80):
                f = -r2
                fp = 0.0
                for i in range(ln):
                    den = 1.0 + lam * wflat[wo + i]
                    f += wflat[wo + i] * q[i] * q[i] / (den * den)
                    fp -= 2.0 * wflat[wo + i] * wflat[wo + i] * q[i] * q[i] / (den * den * den)
                if f <= 1e-13 * r2:
                    break
                lam -= f / fp
            val = 0.0
            for i in range(ln):
                y[i] = q[i] / (1.0 + lam * wflat[wo + i])
                val += wflat[wo + i] * y[i] * y[i]
            if val > r2:
                scalev = (r / sqrt(val)) * (1.0 - 1e-14)
                for i in range(ln):
                    y[i] *= scalev
            for i in range(ln):
                val = 0.0
                for j in range(ln):
                    val += vflat[vo + i * ln + j] * y[j]
                out[s + i] = centers[s + i] + val
    return


cdef double _support_blocks_c(
    double[::1] yv,
    long[::1] starts, long[::1] lens, long[::1] kinds, double[::1] radii,
    double[::1] centers, double[::1] vflat, long[::1] voffs,
    double[::1] sflat, long[::1] woffs,
    double[::1] q,
) noexcept nogil:
    cdef int nb = starts.shape[0]
    cdef int b, s, ln, i, j
    cdef double total = 0.0, nrm, val
    cdef long vo, wo
    for b in range(nb):
        s = <int> starts[b]
        ln = <int> lens[b]
        if kinds[b] == 0:
            nrm = 0.0
            for i in range(ln):
                total += yv[s + i] * centers[s + i]
                nrm += yv[s + i] * yv[s + i]
            total += radii[b] * sqrt(nrm)
        else:
            vo = voffs[b]
            wo = woffs[b]
            nrm = 0.0
            for i in range(ln):
                val = 0.0
                for j in range(ln):
                    val += vflat[vo + j * ln + i] * yv[s + j]
                val /= sflat[wo + i]
                nrm += val * val
                total += yv[s + i] * centers[s + i]
            total += radii[b] * sqrt(nrm)
    return total


cdef double _box_lin_quad_min_c(
    double[::1] theta, double[::1] c, double[::1] lo, double[::1] hi, int d
) noexcept nogil:
    cdef int l
    cdef double total = 0.0, v
    for l in range(d):
        if theta[l] > 0.0:
            v = -c[l] / (2.0 * theta[l])
            if v < lo[l]:
                v = lo[l]
            elif v > hi[l]:
                v = hi[l]
        else:
            v = lo[l] if c[l] >= 0.0 else hi[l]
        total += theta[l] * v * v + c[l] * v
    return total


def admm_qp(
    D, theta, lin, double const, box_lo, box_hi,
    starts, lens, kinds, radii, centers_full, vmats, svals,
    double rho, double tol, int max_iter,
    double lb_stop=INFINITY, double ub_stop=-INFINITY, v0=None, lam0=None,
):
    """ADMM for the box/ball-product QP (see python twin for semantics)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Da = np.ascontiguousarray(D, dtype=np.float64)
    cdef int d = Da.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] li = np.ascontiguousarray(lin, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] blo = np.ascontiguousarray(box_lo, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bhi = np.ascontiguousarray(box_hi, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] st = np.ascontiguousarray(starts, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] le = np.ascontiguousarray(lens, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ki = np.ascontiguousarray(kinds, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ra = np.ascontiguousarray(radii, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ce = np.ascontiguousarray(centers_full, dtype=np.float64)

    # pack the per-block ellipsoid data into flat arrays
    cdef int nb = st.shape[0]
    v_parts = []
    s_parts = []
    w_parts = []
    voffs_np = np.full(nb, -1, dtype=np.int64)
    woffs_np = np.full(nb, -1, dtype=np.int64)
    cdef int b
    cdef long vo = 0, wo = 0
    for b in range(nb):
        if ki[b] == 1:
            V = np.ascontiguousarray(vmats[b], dtype=np.float64)
            s_arr = np.ascontiguousarray(svals[b], dtype=np.float64)
            v_parts.append(V.ravel())
            s_parts.append(s_arr)
            w_parts.append(s_arr * s_arr)
            voffs_np[b] = vo
            woffs_np[b] = wo
            vo += V.size
            wo += s_arr.size
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vflat = (
        np.concatenate(v_parts) if v_parts else np.zeros(1)
    )
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sflat = (
        np.concatenate(s_parts) if s_parts else np.ones(1)
    )
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wflat = (
        np.concatenate(w_parts) if w_parts else np.ones(1)
    )
    cdef cnp.ndarray[cnp.int64_t, ndim=1] voffs = voffs_np
    cdef cnp.ndarray[cnp.int64_t, ndim=1] woffs = woffs_np

    cdef cnp.ndarray[cnp.float64_t, ndim=1] v = (
        np.zeros(d) if v0 is None else np.array(v0, dtype=np.float64).ravel().copy()
    )
    cdef cnp.ndarray[cnp.float64_t, ndim=1] lam = (
        np.zeros(d) if lam0 is None else np.array(lam0, dtype=np.float64).ravel().copy()
    )
    cdef cnp.ndarray[cnp.float64_t, ndim=1] mu = np.empty(d)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] mu_prev = np.empty(d)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dv = np.empty(d)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dtw = np.empty(d)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] work1 = np.empty(d)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] qbuf = np.empty(d)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ybuf = np.empty(d)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] v_ub = np.empty(d)

    cdef double[:, ::1] Dv_ = Da
    cdef double[::1] thv = th, liv = li, blov = blo, bhiv = bhi
    cdef long[::1] stv = st, lev = le, kiv = ki
    cdef double[::1] rav = ra, cev = ce
    cdef double[::1] vflatv = vflat, sflatv = sflat, wflatv = wflat
    cdef long[::1] voffsv = voffs, woffsv = woffs
    cdef double[::1] vv = v, lamv = lam, muv = mu, mupv = mu_prev
    cdef double[::1] dvv = dv, dtwv = dtw, w1 = work1, qv = qbuf, yv = ybuf, vubv = v_ub

    cdef double lb_best = -INFINITY
    cdef int status = C_MAX_ITER
    cdef int it = 0, i
    cdef double rp, rd, maxv, maxlam, den, lb, viol, raw
    cdef double ub = INFINITY
    cdef bint converged, check

    # mu = project(D v)
    _matvec(Dv_, vv, dvv, d, 0)
    _project_blocks_c(dvv, muv, stv, lev, kiv, rav, cev, vflatv, voffsv, wflatv, woffsv, qv, yv)

    with nogil:
        for it in range(1, max_iter + 1):
            # v-step
            for i in range(d):
                w1[i] = muv[i] - lamv[i]
            _matvec(Dv_, w1, dtwv, d, 1)
            for i in range(d):
                den = 2.0 * thv[i] + rho
                raw = (rho * dtwv[i] - liv[i]) / den
                if raw < blov[i]:
                    raw = blov[i]
                elif raw > bhiv[i]:
                    raw = bhiv[i]
                vv[i] = raw
            _matvec(Dv_, vv, dvv, d, 0)
            # mu-step
            for i in range(d):
                mupv[i] = muv[i]
                w1[i] = dvv[i] + lamv[i]
            _project_blocks_c(w1, muv, stv, lev, kiv, rav, cev, vflatv, voffsv, wflatv, woffsv, qv, yv)
            # dual update and residuals
            rp = 0.0
            rd = 0.0
            maxv = 0.0
            maxlam = 0.0
            for i in range(d):
                lamv[i] += dvv[i] - muv[i]
                raw = fabs(dvv[i] - muv[i])
                if raw > rp:
                    rp = raw
                raw = fabs(muv[i] - mupv[i])
                if raw > rd:
                    rd = raw
                if fabs(vv[i]) > maxv:
                    maxv = fabs(vv[i])
                if fabs(lamv[i]) > maxlam:
                    maxlam = fabs(lamv[i])
            rd *= rho
            converged = rp <= tol * (1.0 + maxv) and rd <= tol * (1.0 + rho * maxlam)
            check = converged or (it & 15) == 0
            if check:
                # certified dual bound at y = rho * lam
                for i in range(d):
                    w1[i] = rho * lamv[i]
                _matvec(Dv_, w1, dtwv, d, 1)
                for i in range(d):
                    dtwv[i] += liv[i]
                lb = _box_lin_quad_min_c(thv, dtwv, blov, bhiv, d) + const
                lb -= _support_blocks_c(w1, stv, lev, kiv, rav, cev, vflatv, voffsv, sflatv, woffsv, qv)
                if lb > lb_best:
                    lb_best = lb
                # feasible value at clip(D' mu)
                _matvec(Dv_, muv, dtwv, d, 1)
                viol = 0.0
                maxv = 0.0
                for i in range(d):
                    raw = dtwv[i]
                    if blov[i] - raw > viol:
                        viol = blov[i] - raw
                    if raw - bhiv[i] > viol:
                        viol = raw - bhiv[i]
                    if raw < blov[i]:
                        raw = blov[i]
                    elif raw > bhiv[i]:
                        raw = bhiv[i]
                    vubv[i] = raw
                    if fabs(raw) > maxv:
                        maxv = fabs(raw)
                if viol > 100.0 * tol * (1.0 + maxv):
                    ub = INFINITY
                else:
                    ub = const
                    for i in range(d):
                        ub += thv[i] * vubv[i] * vubv[i] + liv[i] * vubv[i]
                if lb_best > lb_stop:
                    status = C_PRUNED_LB
                    break
                if ub < ub_stop:
                    status = C_SIGN_UB
                    break
                if converged:
                    status = C_OK
                    break
            if (it & 31) == 0:
                if rp > 10.0 * rd and rho < 1e8:
                    rho *= 2.0
                    for i in range(d):
                        lamv[i] *= 0.5
                elif rd > 10.0 * rp and rho > 1e-8:
                    rho *= 0.5
                    for i in range(d):
                        lamv[i] *= 2.0

    if status == C_MAX_ITER:
        # final value and bound
        _matvec(Dv_, muv, dtwv, d, 1)
        viol = 0.0
        maxv = 0.0
        for i in range(d):
            raw = dtwv[i]
            if blov[i] - raw > viol:
                viol = blov[i] - raw
            if raw - bhiv[i] > viol:
                viol = raw - bhiv[i]
            if raw < blov[i]:
                raw = blov[i]
            elif raw > bhiv[i]:
                raw = bhiv[i]
            vubv[i] = raw
            if fabs(raw) > maxv:
                maxv = fabs(raw)
        if viol > 100.0 * tol * (1.0 + maxv):
            ub = INFINITY
        else:
            ub = const
            for i in range(d):
                ub += thv[i] * vubv[i] * vubv[i] + liv[i] * vubv[i]
        for i in range(d):
            work1[i] = rho * lamv[i]
        _matvec(Dv_, work1, dtwv, d, 1)
        for i in range(d):
            dtwv[i] += liv[i]
        lb = _box_lin_quad_min_c(thv, dtwv, blov, bhiv, d) + const
        lb -= _support_blocks_c(work1, stv, lev, kiv, rav, cev, vflatv, voffsv, sflatv, woffsv, qv)
        if lb > lb_best:
            lb_best = lb
    return v_ub, mu, lam, ub, lb_best, status, it
