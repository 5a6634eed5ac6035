"""Constrained solver for the shifted quadratic subproblem.

For a given ratio parameter the inner problem ``min x' O1 x + O2 x + O3``
over a product of per-block norm balls can be indefinite.  The solve
congruently diagonalizes ``O1``, splits convex and concave coordinates,
underestimates every concave square by uniform-breakpoint chords (the
lambda form with binary segment selectors), and minimizes the resulting
convex relaxation exactly by branch-and-bound over the segment choices.
Each node/leaf is a convex QP solved by ADMM with certified dual bounds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import backend
from .qfp import ParametricQFP, SolverError

_ZERO_REL = 1e-12


@dataclass(frozen=True)
class BallConstraint:
    """``{xi : ||center - map @ xi|| <= radius}`` on one block of the variable.

    ``map is None`` means the identity, i.e. a plain ball around ``center``.
    ``block`` is the half-open index range of the decision vector the
    constraint acts on.
    """

    center: np.ndarray
    radius: float
    block: tuple[int, int]
    map: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.radius < 0.0:
            raise ValueError("radius must be nonnegative")
        if self.map is not None:
            object.__setattr__(self, "map", np.asarray(self.map, dtype=float))

    @property
    def size(self) -> int:
        return self.block[1] - self.block[0]

    def violation(self, xi_block) -> float:
        """``||center - map xi||^2 - radius^2`` (<= 0 means feasible)."""
        xi_block = np.asarray(xi_block, dtype=float)
        m = xi_block if self.map is None else self.map @ xi_block
        return float(np.sum((self.center - m) ** 2)) - self.radius**2


def stability_ball(A, C, eps3: float, block: tuple[int, int] | None = None) -> BallConstraint:
    """Gain set ``||vec(A) - (C' (x) I) vec(L)||^2 <= 1 - eps3``.

    Any gain in this set gives ``||A - L C||_2 <= ||A - L C||_F <= 1``, so the
    homogeneous observer error map is nonexpansive.
    """
    if not 0.0 < eps3 < 1.0:
        raise ValueError(f"eps3 must lie in (0, 1), got {eps3}")
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    n_x = A.shape[0]
    n_y = C.shape[0]
    dim = n_x * n_y
    if block is None:
        block = (0, dim)
    if block[1] - block[0] != dim:
        raise ValueError("block size must equal n_x * n_y")
    return BallConstraint(
        center=A.flatten(order="F"),
        radius=float(np.sqrt(1.0 - eps3)),
        block=block,
        map=np.kron(C.T, np.eye(n_x)),
    )


def input_ball(u_center, u_max: float, block: tuple[int, int]) -> BallConstraint:
    """Energy bound ``||u - u_center|| <= u_max``."""
    return BallConstraint(center=u_center, radius=float(u_max), block=block)


class _PackedBlocks:
    """Per-block projection/support data shared by the ADMM kernel calls."""

    def __init__(self, constraints: list[BallConstraint], dim: int):
        blocks = sorted(constraints, key=lambda c: c.block[0])
        pos = 0
        for c in blocks:
            if c.block[0] != pos:
                raise ValueError("constraints must partition the variable (set unbounded)")
            pos = c.block[1]
        if pos != dim:
            raise ValueError("constraints must partition the variable (set unbounded)")
        self.dim = dim
        self.starts = np.array([c.block[0] for c in blocks], dtype=np.int64)
        self.lens = np.array([c.size for c in blocks], dtype=np.int64)
        self.kinds = np.zeros(len(blocks), dtype=np.int64)
        self.radii = np.empty(len(blocks))
        self.centers_full = np.zeros(dim)
        self.vmats: list[np.ndarray | None] = []
        self.svals: list[np.ndarray | None] = []
        self.minv_t: list[np.ndarray | None] = []
        self.constraints = blocks
        for b, c in enumerate(blocks):
            s, ln = c.block[0], c.size
            if c.map is None:
                self.radii[b] = c.radius
                self.centers_full[s : s + ln] = c.center
                self.vmats.append(None)
                self.svals.append(None)
                self.minv_t.append(None)
                continue
            M = c.map
            if M.shape != (ln, ln):
                raise ValueError("constraint map must be square on its block")
            U, svals, Vt = np.linalg.svd(M)
            if svals[-1] <= 1e-12 * svals[0]:
                raise ValueError("constraint map is singular (set unbounded)")
            xi0 = Vt.T @ ((U.T @ c.center) / svals)
            if np.allclose(svals, svals[0], rtol=1e-12, atol=0.0) and np.allclose(
                M.T @ M, svals[0] ** 2 * np.eye(ln), rtol=0.0, atol=1e-12 * svals[0] ** 2
            ):
                # map with orthogonal rows: the set is a plain ball
                self.kinds[b] = 0
                self.radii[b] = c.radius / svals[0]
                self.centers_full[s : s + ln] = xi0
                self.vmats.append(None)
                self.svals.append(None)
                self.minv_t.append(None)
            else:
                self.kinds[b] = 1
                self.radii[b] = c.radius
                self.centers_full[s : s + ln] = xi0
                self.vmats.append(np.ascontiguousarray(Vt.T))
                self.svals.append(svals.copy())
                self.minv_t.append(U @ np.diag(1.0 / svals) @ Vt)

    def support_halfwidths(self, directions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Range of ``d . xi`` over the product set for each column ``d``.

        Returns ``(center_part, halfwidth)`` per column.
        """
        ncols = directions.shape[1]
        centers = np.zeros(ncols)
        halfw = np.zeros(ncols)
        for b in range(len(self.starts)):
            s, ln = self.starts[b], self.lens[b]
            d_b = directions[s : s + ln, :]
            centers += self.centers_full[s : s + ln] @ d_b
            if self.kinds[b] == 0:
                halfw += self.radii[b] * np.linalg.norm(d_b, axis=0)
            else:
                halfw += self.radii[b] * np.linalg.norm(self.minv_t[b] @ d_b, axis=0)
        return centers, halfw


@dataclass(frozen=True)
class DiagonalizedProblem:
    """``Phi(v) = theta . v^2 + lin . v + const`` with ``mu = D v``, D orthogonal.

    ``theta`` is ascending, so the ``t`` strictly negative (concave) entries
    come first; entries within the zero tolerance are snapped to 0 and belong
    to neither split.
    """

    D: np.ndarray
    theta: np.ndarray
    lin: np.ndarray
    const: float
    t: int


def diagonalize(O1, O2=None, O3: float = 0.0) -> DiagonalizedProblem:
    O1 = np.asarray(O1, dtype=float)
    dim = O1.shape[0]
    if O2 is None:
        O2 = np.zeros(dim)
    evals, evecs = np.linalg.eigh(0.5 * (O1 + O1.T))
    ztol = _ZERO_REL * max(1.0, float(np.max(np.abs(evals))))
    theta = np.where(np.abs(evals) <= ztol, 0.0, evals)
    t = int(np.sum(theta < 0.0))
    return DiagonalizedProblem(
        D=evecs, theta=theta, lin=np.asarray(O2, dtype=float) @ evecs, const=float(O3), t=t
    )


def bound_box_for_v(constraints: list[BallConstraint], D: np.ndarray):
    """Per-coordinate interval of ``v = D^{-1} mu`` over the product set."""
    packed = constraints if isinstance(constraints, _PackedBlocks) else _PackedBlocks(
        list(constraints), D.shape[0]
    )
    centers, halfw = packed.support_halfwidths(D)
    return centers - halfw, centers + halfw


@dataclass(frozen=True)
class PiecewiseGrid:
    """Uniform breakpoints per concave coordinate: shape ``(t, m + 1)``."""

    breakpoints: np.ndarray
    m: int

    @classmethod
    def uniform(cls, lo, hi, m: int) -> "PiecewiseGrid":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if m < 1:
            raise ValueError("segment count must be at least 1")
        if np.any(hi < lo):
            raise ValueError("empty interval")
        bp = np.linspace(lo, hi, m + 1, axis=1)
        return cls(breakpoints=bp, m=m)


@dataclass
class RelaxationInstance:
    """Concave-split problem plus its piecewise grid and the full v-box."""

    dp: DiagonalizedProblem
    grid: PiecewiseGrid
    box_lo: np.ndarray
    box_hi: np.ndarray

    def __post_init__(self):
        if self.grid.breakpoints.shape[0] != self.dp.t:
            raise ValueError("grid must cover exactly the concave coordinates")

    def f_true(self, v) -> float:
        v = np.asarray(v, dtype=float)
        return float(self.dp.theta @ (v * v) + self.dp.lin @ v + self.dp.const)

    def f_tilde(self, v, zeta) -> float:
        """Relaxed objective: chord weights on concave squares, exact elsewhere.

        ``zeta`` has shape ``(t, m + 1)`` with rows summing to 1 and
        ``v[l] = sum_s zeta[l, s] * breakpoint[l, s]``.
        """
        v = np.asarray(v, dtype=float)
        zeta = np.asarray(zeta, dtype=float)
        t = self.dp.t
        bp = self.grid.breakpoints
        val = float(self.dp.lin @ v + self.dp.const)
        for l in range(t):
            if not np.isclose(zeta[l] @ bp[l], v[l], atol=1e-9):
                raise ValueError("zeta inconsistent with v")
            val += self.dp.theta[l] * float(zeta[l] @ bp[l] ** 2)
        val += float(self.dp.theta[t:] @ (v[t:] * v[t:]))
        return val

    def leaf_coefficients(self, segments):
        """Chord-substituted coefficients for one segment choice per concave coord."""
        theta_eff = np.maximum(self.dp.theta, 0.0)
        lin_eff = self.dp.lin.copy()
        const_eff = self.dp.const
        box_lo = self.box_lo.copy()
        box_hi = self.box_hi.copy()
        for l, s in enumerate(segments):
            a = self.grid.breakpoints[l, s]
            b = self.grid.breakpoints[l, s + 1]
            lin_eff[l] += self.dp.theta[l] * (a + b)
            const_eff -= self.dp.theta[l] * a * b
            box_lo[l], box_hi[l] = a, b
        return theta_eff, lin_eff, const_eff, box_lo, box_hi

    def node_coefficients(self, ranges):
        """Chord over a contiguous breakpoint range per concave coordinate."""
        segs = []
        theta_eff = np.maximum(self.dp.theta, 0.0)
        lin_eff = self.dp.lin.copy()
        const_eff = self.dp.const
        box_lo = self.box_lo.copy()
        box_hi = self.box_hi.copy()
        for l, (i0, i1) in enumerate(ranges):
            a = self.grid.breakpoints[l, i0]
            b = self.grid.breakpoints[l, i1]
            lin_eff[l] += self.dp.theta[l] * (a + b)
            const_eff -= self.dp.theta[l] * a * b
            box_lo[l], box_hi[l] = a, b
            segs.append((i0, i1))
        return theta_eff, lin_eff, const_eff, box_lo, box_hi


@dataclass
class RelaxedSolution:
    objective: float
    lower_bound: float
    v: np.ndarray
    mu: np.ndarray
    zeta: np.ndarray
    nu: np.ndarray
    nodes: int
    certificate: str = "optimal"  # or "sign-negative" / "sign-positive"


def build_relaxation(
    dp: DiagonalizedProblem,
    grid: PiecewiseGrid,
    box_lo,
    box_hi,
) -> RelaxationInstance:
    return RelaxationInstance(
        dp=dp,
        grid=grid,
        box_lo=np.asarray(box_lo, dtype=float),
        box_hi=np.asarray(box_hi, dtype=float),
    )


def _zeta_from_leaf(instance: RelaxationInstance, segments, v) -> tuple[np.ndarray, np.ndarray]:
    t = instance.dp.t
    m = instance.grid.m
    zeta = np.zeros((t, m + 1))
    nu = np.zeros((t, m), dtype=int)
    for l, s in enumerate(segments):
        a = instance.grid.breakpoints[l, s]
        b = instance.grid.breakpoints[l, s + 1]
        width = max(b - a, 1e-300)
        frac = min(max((v[l] - a) / width, 0.0), 1.0)
        zeta[l, s] = 1.0 - frac
        zeta[l, s + 1] = frac
        nu[l, s] = 1
    return zeta, nu


def _solve_qp(instance, packed, theta, lin, const, box_lo, box_hi, tol, max_iter,
              lb_stop=np.inf, ub_stop=-np.inf, warm=None):
    rho = 1.0 + float(np.max(theta, initial=0.0))
    v0 = warm[0] if warm is not None else None
    lam0 = warm[1] if warm is not None else None
    return backend.admm_qp(
        instance.dp.D, theta, lin, const, box_lo, box_hi,
        packed.starts, packed.lens, packed.kinds, packed.radii,
        packed.centers_full, packed.vmats, packed.svals,
        rho, tol, max_iter, lb_stop, ub_stop, v0, lam0,
    )


def _fmax_over_box(theta, lin, const, lo, hi):
    """Upper bound of the convex node objective over its box (endpoint max)."""
    at_lo = theta * lo * lo + lin * lo
    at_hi = theta * hi * hi + lin * hi
    return float(np.sum(np.maximum(at_lo, at_hi))) + const


def _segments_of(instance: RelaxationInstance, v) -> tuple[int, ...]:
    """Segment index containing each concave coordinate of ``v``."""
    segs = []
    for l in range(instance.dp.t):
        bp = instance.grid.breakpoints[l]
        width = (bp[-1] - bp[0]) / instance.grid.m
        if width <= 0.0:
            segs.append(0)
            continue
        s = int((v[l] - bp[0]) / width)
        segs.append(min(max(s, 0), instance.grid.m - 1))
    return tuple(segs)


def _leaf_value_at(instance: RelaxationInstance, v) -> tuple[tuple[int, ...], float]:
    """Relaxation value of a feasible point: chords of the segments holding it."""
    segs = _segments_of(instance, v)
    theta, lin, const, lo, hi = instance.leaf_coefficients(segs)
    vv = np.clip(v, lo, hi)
    return segs, float(theta @ (vv * vv) + lin @ vv + const)


def solve_relaxed(
    instance: RelaxationInstance,
    constraints,
    *,
    prune: bool = False,
    gap: float = 0.0,
    sign_band: float | None = None,
    warm_nu=None,
    tol: float = 1e-9,
    max_iter: int = 100_000,
    node_limit: int = 200_000,
) -> RelaxedSolution:
    """Globally minimize the piecewise relaxation over the constraint set.

    Default mode evaluates every segment combination in lexicographic order
    (ties break toward the smallest selector pattern).  ``prune=True``
    switches to branch-and-bound with certified dual node bounds: the
    returned objective is within ``gap`` (plus solver tolerance) of the
    exhaustive optimum.  ``sign_band`` additionally allows an early return
    once the optimum is certified outside ``[-band, band]`` (used by the
    ratio bisection, which only needs the sign away from the root).
    """
    dim = instance.dp.theta.shape[0]
    packed = constraints if isinstance(constraints, _PackedBlocks) else _PackedBlocks(
        list(constraints), dim
    )
    t = instance.dp.t
    m = instance.grid.m

    if t == 0:
        theta = np.maximum(instance.dp.theta, 0.0)
        v, mu, _, ub, lb, status, _ = _solve_qp(
            instance, packed, theta, instance.dp.lin, instance.dp.const,
            instance.box_lo, instance.box_hi, tol, max_iter,
            lb_stop=sign_band if sign_band is not None else np.inf,
            ub_stop=-sign_band if sign_band is not None else -np.inf,
        )
        cert = "optimal"
        if status == backend.PRUNED_LB:
            cert = "sign-positive"
            ub = lb if not np.isfinite(ub) else ub
        elif status == backend.SIGN_UB:
            cert = "sign-negative"
        return RelaxedSolution(ub, lb, v, mu, np.zeros((0, m + 1)), np.zeros((0, m), dtype=int),
                               1, cert)

    incumbent = np.inf
    best = None
    nodes = 0
    open_lbs: list[float] = []
    sign_stop = sign_band if sign_band is not None else np.inf

    def leaf_solve(segments, lb_stop=np.inf, warm=None):
        theta, lin, const, lo, hi = instance.leaf_coefficients(segments)
        fmax = _fmax_over_box(theta, lin, const, lo, hi)
        cap = min(lb_stop, fmax + 1e-9 * (1.0 + abs(fmax)) + 1e-12)
        return _solve_qp(instance, packed, theta, lin, const, lo, hi, tol, max_iter,
                         lb_stop=cap, ub_stop=-sign_stop, warm=warm)

    def harvest(segments, v, mu, ub):
        nonlocal incumbent, best
        if np.isfinite(ub) and ub < incumbent:
            incumbent = ub
            best = (v, mu, segments)

    if not prune:
        for segments in itertools.product(range(m), repeat=t):
            nodes += 1
            if nodes > node_limit:
                raise SolverError(f"node limit {node_limit} exceeded")
            v, mu, _, ub, lb, status, _ = leaf_solve(segments)
            open_lbs.append(lb)
            harvest(segments, v, mu, ub)
        global_lb = min(open_lbs)
    else:
        root_ranges = tuple((0, m) for _ in range(t))
        stack: list[tuple[tuple, object]] = []
        warm_leaves = []
        if warm_nu is not None and len(warm_nu) == t and all(0 <= s < m for s in warm_nu):
            warm_leaves.append(tuple(int(s) for s in warm_nu))
        first = True
        while stack or first or warm_leaves:
            nodes += 1
            if nodes > node_limit:
                raise SolverError(f"node limit {node_limit} exceeded")
            if first:
                ranges, warm = root_ranges, None
            elif warm_leaves:
                segments = warm_leaves.pop()
                v, mu, _, ub, lb, status, _ = leaf_solve(segments, lb_stop=incumbent - gap)
                open_lbs.append(lb)
                harvest(segments, v, mu, ub)
                if status == backend.SIGN_UB or incumbent < -sign_stop:
                    zeta, nu = _zeta_from_leaf(instance, segments, v)
                    return RelaxedSolution(incumbent, min(open_lbs), v, mu, zeta, nu, nodes,
                                           "sign-negative")
                continue
            else:
                ranges, warm = stack.pop()
            is_leaf = all(i1 - i0 == 1 for i0, i1 in ranges)
            if is_leaf and not first:
                segments = tuple(i0 for i0, _ in ranges)
                v, mu, _, ub, lb, status, _ = leaf_solve(segments, lb_stop=incumbent - gap, warm=warm)
                open_lbs.append(lb)
                harvest(segments, v, mu, ub)
                if status == backend.SIGN_UB or incumbent < -sign_stop:
                    zeta, nu = _zeta_from_leaf(instance, segments, v)
                    return RelaxedSolution(incumbent, min(open_lbs), v, mu, zeta, nu, nodes,
                                           "sign-negative")
                continue
            theta, lin, const, lo, hi = instance.node_coefficients(ranges)
            fmax = _fmax_over_box(theta, lin, const, lo, hi)
            cap = min(incumbent - gap, fmax + 1e-9 * (1.0 + abs(fmax)) + 1e-12)
            v, mu, lam, ub, lb, status, _ = _solve_qp(
                instance, packed, theta, lin, const, lo, hi, tol, max_iter,
                lb_stop=cap, warm=warm,
            )
            if status == backend.OK and np.isfinite(ub):
                segs_v, val_v = _leaf_value_at(instance, v)
                harvest(segs_v, v, mu, val_v)
                if incumbent < -sign_stop:
                    zeta, nu = _zeta_from_leaf(instance, segs_v, v)
                    return RelaxedSolution(incumbent, min(open_lbs, default=incumbent), v, mu,
                                           zeta, nu, nodes, "sign-negative")
            if first:
                first = False
                if sign_band is not None and lb > sign_band:
                    zeta = np.zeros((t, m + 1))
                    nu = np.zeros((t, m), dtype=int)
                    return RelaxedSolution(lb, lb, v, mu, zeta, nu, nodes, "sign-positive")
            if status == backend.PRUNED_LB or lb >= incumbent - gap:
                open_lbs.append(lb)
                continue
            if all(i1 - i0 == 1 for i0, i1 in ranges):
                # root was already a leaf; its bound is exact
                open_lbs.append(lb)
                segments = tuple(i0 for i0, _ in ranges)
                harvest(segments, v, mu, ub)
                continue
            widths = [
                (instance.grid.breakpoints[l, i1] - instance.grid.breakpoints[l, i0], -l)
                for l, (i0, i1) in enumerate(ranges)
                if i1 - i0 > 1
            ]
            _, neg_l = max(widths)
            split_l = -neg_l
            i0, i1 = ranges[split_l]
            mid = (i0 + i1) // 2
            upper = list(ranges)
            upper[split_l] = (mid, i1)
            lower = list(ranges)
            lower[split_l] = (i0, mid)
            stack.append((tuple(upper), (v, lam)))
            stack.append((tuple(lower), (v, lam)))
        global_lb = min(open_lbs, default=incumbent)

    if best is None:
        raise SolverError("relaxation search found no feasible leaf")
    v, mu, segments = best
    zeta, nu = _zeta_from_leaf(instance, segments, v)
    return RelaxedSolution(incumbent, global_lb, v, mu, zeta, nu, nodes, "optimal")


def relax_and_solve(
    O1,
    O2,
    O3,
    constraints,
    *,
    m: int = 16,
    prune: bool = False,
    gap: float = 0.0,
    sign_band: float | None = None,
    warm_nu=None,
    tol: float = 1e-9,
    max_iter: int = 100_000,
) -> RelaxedSolution:
    """Diagonalize, bound, grid and solve one shifted quadratic over the set."""
    dp = diagonalize(O1, O2, O3)
    dim = dp.theta.shape[0]
    packed = constraints if isinstance(constraints, _PackedBlocks) else _PackedBlocks(
        list(constraints), dim
    )
    box_lo, box_hi = bound_box_for_v(packed, dp.D)
    grid = PiecewiseGrid.uniform(box_lo[: dp.t], box_hi[: dp.t], m)
    instance = build_relaxation(dp, grid, box_lo, box_hi)
    return solve_relaxed(
        instance, packed, prune=prune, gap=gap, sign_band=sign_band,
        warm_nu=warm_nu, tol=tol, max_iter=max_iter,
    )


class ConstrainedInner:
    """``M(gamma)`` oracle over the constraint set, for the ratio bisection.

    Solves the shifted problem through the piecewise relaxation (prune mode,
    value gap ``gap``); away from the root it may return early with just a
    certified sign.  Keeps the last segment choice as a warm start across
    gamma values.
    """

    def __init__(self, p: ParametricQFP, constraints, *, m: int = 16, gap: float = 5e-9,
                 tol: float = 1e-9, max_iter: int = 100_000):
        self.p = p
        self.packed = _PackedBlocks(list(constraints), p.dim)
        self.m = m
        self.gap = gap
        self.tol = tol
        self.max_iter = max_iter
        self._warm_nu = None
        self.last_solution: RelaxedSolution | None = None

    def __call__(self, gamma: float):
        O1, O2, O3 = self.p.shifted(gamma)
        sol = relax_and_solve(
            O1, O2, O3, self.packed,
            m=self.m, prune=True, gap=self.gap, sign_band=self.gap,
            warm_nu=self._warm_nu, tol=self.tol, max_iter=self.max_iter,
        )
        if sol.nu.shape[0]:
            self._warm_nu = tuple(int(np.argmax(row)) for row in sol.nu)
        else:
            self._warm_nu = None
        self.last_solution = sol
        if sol.certificate == "sign-positive":
            return sol.lower_bound, sol.mu
        return sol.objective, sol.mu
