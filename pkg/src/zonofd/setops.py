"""Zonotope and interval-matrix arithmetic.

A zonotope ``<c, H>`` is the set ``{c + H @ xi : ||xi||_inf <= 1}``.  All
state, output, residual and uncertainty sets in this package are zonotopes;
the operations here are the closed-form rules for Minkowski sums, linear
maps, order reduction and the enclosure of an interval-matrix/vector product.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog


class DegenerateSetError(ValueError):
    """Raised when an operation requires a set with nonzero generator size."""


def _as_vector(x, name="vector") -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


class Zonotope:
    """Centrally symmetric convex set given by a center and a generator matrix.

    ``generators`` has one row per dimension and one column per generator;
    zero columns are legal and an empty matrix (r = 0) denotes a singleton.
    Instances are immutable: the underlying arrays are marked read-only.
    """

    __slots__ = ("center", "generators")

    # keep numpy from hijacking `matrix @ zonotope`
    __array_ufunc__ = None

    def __init__(self, center, generators=None):
        c = _as_vector(center, "center")
        if generators is None:
            H = np.zeros((c.shape[0], 0))
        else:
            H = np.asarray(generators, dtype=float)
            if H.ndim == 1:
                H = H.reshape(-1, 1)
        if H.ndim != 2 or H.shape[0] != c.shape[0]:
            raise ValueError(
                f"generator matrix shape {H.shape} incompatible with center of length {c.shape[0]}"
            )
        if not np.all(np.isfinite(H)):
            raise ValueError("generator matrix has non-finite entries")
        c = c.copy()
        H = H.copy()
        c.flags.writeable = False
        H.flags.writeable = False
        self.center = c
        self.generators = H

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def order(self) -> int:
        """Number of generator columns."""
        return self.generators.shape[1]

    def __add__(self, other: "Zonotope") -> "Zonotope":
        return minkowski_sum(self, other)

    def __rmatmul__(self, K) -> "Zonotope":
        return linear_map(np.asarray(K, dtype=float), self)

    def __neg__(self) -> "Zonotope":
        return Zonotope(-self.center, -self.generators)

    def __repr__(self):
        return f"Zonotope(dim={self.dim}, order={self.order})"


class IntervalMatrix:
    """Elementwise matrix interval ``[lower, upper]`` with exact mid/rad."""

    __slots__ = ("lower", "upper")

    def __init__(self, lower, upper):
        lo = np.asarray(lower, dtype=float)
        up = np.asarray(upper, dtype=float)
        if lo.shape != up.shape or lo.ndim != 2:
            raise ValueError("lower and upper must be 2-D arrays of equal shape")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(up))):
            raise ValueError("interval bounds must be finite")
        if np.any(lo > up):
            raise ValueError("lower bound exceeds upper bound")
        lo = lo.copy()
        up = up.copy()
        lo.flags.writeable = False
        up.flags.writeable = False
        self.lower = lo
        self.upper = up

    @property
    def mid(self) -> np.ndarray:
        return (self.lower + self.upper) / 2.0

    @property
    def rad(self) -> np.ndarray:
        return (self.upper - self.lower) / 2.0

    @classmethod
    def exact(cls, matrix) -> "IntervalMatrix":
        m = np.asarray(matrix, dtype=float)
        return cls(m, m)

    def __repr__(self):
        return f"IntervalMatrix(shape={self.lower.shape})"


def minkowski_sum(z1: Zonotope, z2: Zonotope) -> Zonotope:
    """``<c1 + c2, [H1 H2]>``."""
    if z1.dim != z2.dim:
        raise ValueError(f"dimension mismatch: {z1.dim} vs {z2.dim}")
    return Zonotope(z1.center + z2.center, np.hstack((z1.generators, z2.generators)))


def linear_map(K: np.ndarray, z: Zonotope) -> Zonotope:
    """``<K c, K H>``."""
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[1] != z.dim:
        raise ValueError(f"map of shape {K.shape} cannot act on dimension {z.dim}")
    return Zonotope(K @ z.center, K @ z.generators)


def f_radius_sq(z: Zonotope) -> float:
    """Squared Frobenius norm of the generator matrix (the F-norm size)."""
    return float(np.sum(z.generators**2))


def excluding_degree(z: Zonotope) -> float:
    """``||c||^2 / ||H||_F^2``: how decisively the set excludes the origin.

    Raises :class:`DegenerateSetError` for an all-zero generator matrix; the
    ratio is meaningless there and would poison downstream mode weights.
    """
    size = f_radius_sq(z)
    if size <= 0.0:
        raise DegenerateSetError("excluding degree undefined for zero-size generator matrix")
    return float(z.center @ z.center) / size


def support(z: Zonotope, direction) -> float:
    """Support function ``max {d.x : x in Z}``."""
    d = _as_vector(direction, "direction")
    if d.shape[0] != z.dim:
        raise ValueError("direction dimension mismatch")
    return float(d @ z.center + np.sum(np.abs(d @ z.generators)))


def _contains_point_2d_full_rank(H: np.ndarray, d: np.ndarray, tol: float) -> bool:
    # Exact facet test for a full-rank planar zonotope: every facet normal is
    # perpendicular to some generator.
    normals = np.stack((-H[1, :], H[0, :]), axis=0)
    lhs = np.abs(normals.T @ d)
    rhs = np.sum(np.abs(normals.T @ H), axis=1)
    return bool(np.all(lhs <= rhs + tol))


def contains_point(z: Zonotope, p, tol: float = 1e-9) -> bool:
    """True iff ``p = c + H xi`` for some ``||xi||_inf <= 1``.

    Decided by a phase-1 linear feasibility program over ``xi`` with box
    constraints (tolerance ``tol`` on the equality residual).  Planar
    full-rank instances take an equivalent exact half-plane test instead of
    the LP; the two paths agree and the fast one dominates simulation runs.
    """
    p = _as_vector(p, "point")
    if p.shape[0] != z.dim:
        raise ValueError("point dimension mismatch")
    d = p - z.center
    H = z.generators
    r = H.shape[1]
    if r == 0:
        return bool(np.max(np.abs(d), initial=0.0) <= tol)
    scale = max(1.0, float(np.max(np.abs(H))))
    if z.dim == 2 and np.linalg.matrix_rank(H, tol=1e-12 * scale) == 2:
        return _contains_point_2d_full_rank(H, d, tol * scale)
    # Phase 1: min sum(e+ + e-)  s.t.  H xi + e+ - e- = d, -1 <= xi <= 1, e >= 0.
    n = z.dim
    cost = np.concatenate((np.zeros(r), np.ones(2 * n)))
    a_eq = np.hstack((H, np.eye(n), -np.eye(n)))
    bounds = [(-1.0, 1.0)] * r + [(0.0, None)] * (2 * n)
    res = linprog(cost, A_eq=a_eq, b_eq=d, bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(f"membership LP failed: {res.message}")
    return bool(res.fun <= tol * scale)


def reduce_order(z: Zonotope, q: int) -> Zonotope:
    """Enclose ``z`` in a zonotope with at most ``q`` generator columns.

    Keeps the ``q - n`` largest-norm columns and boxes the remainder into the
    diagonal of its row-wise absolute sums, so the result always contains the
    input.
    """
    n = z.dim
    if q < n:
        raise ValueError(f"reduction order {q} below dimension {n}")
    H = z.generators
    if H.shape[1] <= q:
        return z
    norms = np.linalg.norm(H, axis=0)
    order = np.argsort(-norms, kind="stable")
    keep = order[: q - n]
    box = order[q - n :]
    boxed = np.diag(np.sum(np.abs(H[:, box]), axis=1))
    return Zonotope(z.center, np.hstack((H[:, keep], boxed)))


def _single_fault_entry(gi: IntervalMatrix) -> int | None:
    """Index of the single interval diagonal entry, or None for identity."""
    lo, up = gi.lower, gi.upper
    if lo.shape[0] != lo.shape[1]:
        raise ValueError("mode bound must be square")
    off = ~np.eye(lo.shape[0], dtype=bool)
    if np.any(lo[off] != 0.0) or np.any(up[off] != 0.0):
        raise ValueError("mode bound must be diagonal")
    d_lo, d_up = np.diag(lo), np.diag(up)
    varying = np.nonzero(d_up - d_lo > 0.0)[0]
    if varying.size == 0:
        if not np.allclose(d_lo, 1.0):
            raise ValueError("degenerate mode bound must be the identity")
        return None
    if varying.size > 1:
        raise ValueError("mode bound must vary in exactly one diagonal entry (single fault)")
    i = int(varying[0])
    fixed = np.ones(lo.shape[0], dtype=bool)
    fixed[i] = False
    if not (np.all(d_lo[fixed] == 1.0) and np.all(d_up[fixed] == 1.0)):
        raise ValueError("healthy diagonal entries of a mode bound must equal 1")
    return i


def closed_fault_interval(gi: IntervalMatrix, eps1: float) -> tuple[int | None, float, float]:
    """``(index, mid, rad)`` of the fault entry after closing the interval.

    The half-open bound ``[lo, 1)`` is replaced by ``[lo, 1 - eps1]``; bounds
    already below ``1 - eps1`` are used as given.
    """
    if not 0.0 <= eps1 < 1.0:
        raise ValueError(f"eps1 must lie in [0, 1), got {eps1}")
    i = _single_fault_entry(gi)
    if i is None:
        return None, 1.0, 0.0
    lo = float(gi.lower[i, i])
    hi = min(float(gi.upper[i, i]), 1.0 - eps1)
    if not 0.0 <= lo <= hi:
        raise ValueError(f"fault interval [{lo}, {hi}] after closure is empty or negative")
    return i, (lo + hi) / 2.0, (hi - lo) / 2.0


def interval_product_enclosure(B: np.ndarray, gi: IntervalMatrix, u, eps1: float) -> Zonotope:
    """Zonotope enclosure of ``{B G u : G in gi}`` for a single-fault bound.

    Only the fault channel varies, so the product sweeps a segment: the
    enclosure is ``<B mid(G) u, rad_i * (B e_i) u_i>`` with one generator
    column, using the closed interval from :func:`closed_fault_interval`.
    """
    B = np.asarray(B, dtype=float)
    u = _as_vector(u, "input")
    if B.shape[1] != u.shape[0] or gi.lower.shape[0] != u.shape[0]:
        raise ValueError("input dimension mismatch")
    i, mid, rad = closed_fault_interval(gi, eps1)
    if i is None:
        return Zonotope(B @ u)
    center = B @ u + (mid - 1.0) * B[:, i] * u[i]
    column = (rad * u[i]) * B[:, i]
    return Zonotope(center, column.reshape(-1, 1))


def boundary_polygon_2d(z: Zonotope) -> np.ndarray:
    """Vertices of a planar zonotope in counterclockwise order.

    Sorts generators by angle and walks the boundary; returns an array of
    shape ``(n_vertices, 2)`` without repeating the first vertex.
    """
    if z.dim != 2:
        raise ValueError("boundary polygon requires dimension 2")
    H = z.generators
    nz = H[:, np.any(H != 0.0, axis=0)]
    if nz.shape[1] == 0:
        return z.center.reshape(1, 2).copy()
    flip = (nz[1, :] < 0.0) | ((nz[1, :] == 0.0) & (nz[0, :] < 0.0))
    G = np.where(flip, -nz, nz)
    ang = np.arctan2(G[1, :], G[0, :])
    G = G[:, np.argsort(ang, kind="stable")]
    verts = [z.center - np.sum(G, axis=1)]
    for j in range(G.shape[1]):
        verts.append(verts[-1] + 2.0 * G[:, j])
    for j in range(G.shape[1] - 1):
        verts.append(verts[-1] - 2.0 * G[:, j])
    out = np.array(verts)
    keep = np.ones(len(out), dtype=bool)
    keep[1:] = np.any(np.abs(np.diff(out, axis=0)) > 0.0, axis=1)
    return out[keep]
