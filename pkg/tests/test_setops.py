import numpy as np
import pytest

from zonofd.setops import (
    DegenerateSetError,
    IntervalMatrix,
    Zonotope,
    boundary_polygon_2d,
    contains_point,
    excluding_degree,
    f_radius_sq,
    interval_product_enclosure,
    linear_map,
    minkowski_sum,
    reduce_order,
    support,
)


def zono(c, H=None):
    return Zonotope(np.asarray(c, dtype=float), None if H is None else np.asarray(H, dtype=float))


class TestMinkowskiSum:
    def test_concatenation(self):
        z = minkowski_sum(zono([1, 0], np.eye(2)), zono([0, 1], 2 * np.eye(2)))
        assert np.allclose(z.center, [1, 1])
        assert np.allclose(z.generators, np.hstack((np.eye(2), 2 * np.eye(2))))

    def test_identity_element(self):
        z = zono([2.0, -1.0], [[1.0, 0.5], [0.0, 1.0]])
        out = z + zono([0.0, 0.0])
        assert np.allclose(out.center, z.center)
        assert np.allclose(out.generators, z.generators)

    def test_one_dimensional(self):
        z = minkowski_sum(zono([1.0], [[2.0]]), zono([-1.0], [[3.0]]))
        assert np.allclose(z.center, [0.0])
        assert np.allclose(z.generators, [[2.0, 3.0]])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            minkowski_sum(zono([0.0]), zono([0.0, 0.0]))


class TestLinearMap:
    def test_identity(self):
        z = zono([1, 2], [[1, 0.3], [0, 1]])
        out = linear_map(np.eye(2), z)
        assert np.allclose(out.center, z.center)
        assert np.allclose(out.generators, z.generators)

    def test_scaling(self):
        out = 2 * np.eye(2) @ zono([1, 1], np.eye(2))
        assert np.allclose(out.center, [2, 2])
        assert np.allclose(out.generators, 2 * np.eye(2))

    def test_projection(self):
        out = linear_map(np.array([[1.0, 1.0]]), zono([1, 2], np.eye(2)))
        assert np.allclose(out.center, [3.0])
        assert np.allclose(out.generators, [[1.0, 1.0]])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            linear_map(np.eye(3), zono([0, 0], np.eye(2)))


class TestFRadius:
    def test_identity_generators(self):
        assert f_radius_sq(zono([9.0, -3.0], np.eye(2))) == pytest.approx(2.0)

    def test_singleton(self):
        assert f_radius_sq(zono([1.0, 1.0])) == 0.0

    def test_direct(self):
        assert f_radius_sq(zono([0, 0], [[4, 1, 0.1], [0, 1, 0]])) == pytest.approx(18.01)


class TestExcludingDegree:
    def test_direct(self):
        assert excluding_degree(zono([3, 4], np.eye(2))) == pytest.approx(12.5)

    def test_origin_centered(self):
        assert excluding_degree(zono([0, 0], np.eye(2))) == 0.0

    def test_off_axis(self):
        assert excluding_degree(zono([1, 0], [[2, 0], [0, 1]])) == pytest.approx(0.2)

    def test_degenerate_raises(self):
        with pytest.raises(DegenerateSetError):
            excluding_degree(zono([1.0, 1.0]))
        with pytest.raises(DegenerateSetError):
            excluding_degree(zono([1.0, 1.0], np.zeros((2, 2))))

    def test_orthogonal_invariance(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = int(rng.integers(2, 5))
            c = rng.normal(size=n)
            H = rng.normal(size=(n, int(rng.integers(1, 6))))
            q, _ = np.linalg.qr(rng.normal(size=(n, n)))
            z = zono(c, H)
            rotated = linear_map(q, z)
            assert excluding_degree(rotated) == pytest.approx(excluding_degree(z), rel=1e-10)


class TestContainsPoint:
    def test_inside_unit_box(self):
        assert contains_point(zono([0, 0], np.eye(2)), [0.5, 0.0])

    def test_outside_unit_box(self):
        assert not contains_point(zono([0, 0], np.eye(2)), [1.5, 0.0])

    def test_sheared(self):
        # a + b = 1.5, b = 0.5 -> a = 1, both coefficients inside [-1, 1]
        assert contains_point(zono([0, 0], [[1, 1], [0, 1]]), [1.5, 0.5])
        assert not contains_point(zono([0, 0], [[1, 1], [0, 1]]), [2.5, 0.5])

    def test_singleton(self):
        assert contains_point(zono([1.0, 2.0]), [1.0, 2.0])
        assert not contains_point(zono([1.0, 2.0]), [1.0, 2.1])

    def test_matches_vertex_oracle_2d(self):
        # Brute-force oracle: dense sampling of the coefficient box.
        rng = np.random.default_rng(3)
        grid = np.linspace(-1.0, 1.0, 21)
        for _ in range(40):
            r = int(rng.integers(1, 5))
            H = rng.normal(size=(2, r))
            c = rng.normal(size=2)
            z = zono(c, H)
            mesh = np.stack(np.meshgrid(*([grid] * r), indexing="ij"), axis=-1).reshape(-1, r)
            cloud = c + mesh @ H.T
            # interior probes from the oracle cloud must be contained
            for p in cloud[:: max(1, len(cloud) // 17)]:
                assert contains_point(z, p)
            # points beyond the support in a random direction must be rejected
            d = rng.normal(size=2)
            d /= np.linalg.norm(d)
            s = support(z, d)
            outside = c + d * (s - d @ c) * 1.05 + d * 1e-3
            if d @ outside > s + 1e-6:
                assert not contains_point(z, outside)

    def test_lp_and_facet_paths_agree(self):
        rng = np.random.default_rng(11)
        for _ in range(60):
            r = int(rng.integers(2, 7))
            H = rng.normal(size=(2, r))
            z3 = Zonotope(np.zeros(3), np.vstack((H, np.zeros((1, r)))))  # forces the LP path
            z2 = zono([0, 0], H)
            p = rng.normal(size=2) * 2.0
            assert contains_point(z2, p) == contains_point(z3, np.append(p, 0.0))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            contains_point(zono([0, 0], np.eye(2)), [0.0])


class TestReduceOrder:
    def test_no_reduction_needed(self):
        z = zono([0, 0], [[4, 1, 0.1], [0, 1, 0]])
        out = reduce_order(z, 3)
        assert np.allclose(out.generators, z.generators)

    def test_interval_hull(self):
        z = zono([0, 0], [[4, 1, 0.1], [0, 1, 0]])
        out = reduce_order(z, 2)
        assert np.allclose(out.generators, np.diag([5.1, 1.0]))

    def test_q_below_dim_raises(self):
        with pytest.raises(ValueError):
            reduce_order(zono([0, 0], np.eye(2)), 1)

    def test_containment(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            r = int(rng.integers(4, 13))
            z = zono(rng.normal(size=2), rng.normal(size=(2, r)))
            red = reduce_order(z, int(rng.integers(2, r + 1)))
            for _ in range(40):
                p = z.center + z.generators @ rng.uniform(-1, 1, size=r)
                assert contains_point(red, p, tol=1e-7)


class TestSupportRelation:
    def test_sum_and_map(self):
        rng = np.random.default_rng(17)
        z1 = zono(rng.normal(size=3), rng.normal(size=(3, 4)))
        z2 = zono(rng.normal(size=3), rng.normal(size=(3, 2)))
        s = z1 + z2
        K = rng.normal(size=(2, 3))
        mapped = K @ z1
        for _ in range(1000):
            d = rng.normal(size=3)
            assert support(s, d) == pytest.approx(support(z1, d) + support(z2, d), abs=1e-10)
            d2 = rng.normal(size=2)
            assert support(mapped, d2) == pytest.approx(support(z1, K.T @ d2), abs=1e-10)


class TestIntervalMatrix:
    def test_mid_rad_roundtrip(self):
        m = IntervalMatrix([[0.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]])
        assert np.allclose(m.mid, [[0.5, 0], [0, 1]])
        assert np.allclose(m.rad, [[0.5, 0], [0, 0]])
        assert np.allclose(m.mid - m.rad, m.lower)
        assert np.allclose(m.mid + m.rad, m.upper)

    def test_ordering_enforced(self):
        with pytest.raises(ValueError):
            IntervalMatrix([[1.0]], [[0.0]])


def fault_bound(n, i, lo=0.0, hi=1.0):
    lower = np.eye(n)
    upper = np.eye(n)
    lower[i, i] = lo
    upper[i, i] = hi
    return IntervalMatrix(lower, upper)


class TestIntervalProductEnclosure:
    def test_hand_example(self):
        z = interval_product_enclosure(np.eye(2), fault_bound(2, 0), [1.0, 1.0], 0.0)
        assert np.allclose(z.center, [0.5, 1.0])
        assert np.allclose(z.generators, [[0.5], [0.0]])

    def test_unexcited_channel(self):
        z = interval_product_enclosure(np.eye(2), fault_bound(2, 0), [0.0, 1.0], 0.01)
        assert np.allclose(z.generators, 0.0)

    def test_healthy_identity_is_singleton(self):
        B = np.array([[0.05, 0.08], [0.07, 0.05]])
        z = interval_product_enclosure(B, IntervalMatrix.exact(np.eye(2)), [1.0, -2.0], 0.01)
        assert z.order == 0
        assert np.allclose(z.center, B @ [1.0, -2.0])

    def test_eps1_out_of_range(self):
        with pytest.raises(ValueError):
            interval_product_enclosure(np.eye(2), fault_bound(2, 0), [1.0, 1.0], 1.0)
        with pytest.raises(ValueError):
            interval_product_enclosure(np.eye(2), fault_bound(2, 0), [1.0, 1.0], -0.1)

    def test_not_single_fault_rejected(self):
        lower = np.eye(2)
        upper = np.eye(2)
        lower[0, 0] = 0.0
        lower[1, 1] = 0.0
        with pytest.raises(ValueError):
            interval_product_enclosure(np.eye(2), IntervalMatrix(lower, upper), [1.0, 1.0], 0.01)

    def test_endpoint_enclosure_oracle(self):
        rng = np.random.default_rng(23)
        eps1 = 0.05
        for _ in range(20):
            B = rng.normal(size=(3, 3))
            u = rng.normal(size=3)
            i = int(rng.integers(0, 3))
            z = interval_product_enclosure(B, fault_bound(3, i), u, eps1)
            for g in rng.uniform(0.0, 1.0 - eps1, size=100):
                G = np.eye(3)
                G[i, i] = g
                assert contains_point(z, B @ G @ u, tol=1e-7)


class TestBoundaryPolygon:
    def test_unit_box(self):
        verts = boundary_polygon_2d(zono([0, 0], np.eye(2)))
        expect = {(-1, -1), (1, -1), (1, 1), (-1, 1)}
        assert {tuple(np.round(v, 9)) for v in verts} == expect

    def test_segment(self):
        verts = boundary_polygon_2d(zono([0, 0], [[1.0], [0.0]]))
        assert {tuple(np.round(v, 9)) for v in verts} == {(-1.0, 0.0), (1.0, 0.0)}

    def test_parallelogram_matches_vertex_oracle(self):
        z = zono([0, 0], [[1, 1], [0, 1]])
        verts = {tuple(np.round(v, 9)) for v in boundary_polygon_2d(z)}
        corners = np.array([z.generators @ s for s in
                            [(1, 1), (1, -1), (-1, 1), (-1, -1)]])
        # convex hull of the corner cloud: the parallelogram's 4 extreme points
        expect = {(2.0, 1.0), (-2.0, -1.0), (0.0, 1.0), (0.0, -1.0)}
        assert verts == expect
        assert all(tuple(np.round(c, 9)) in verts or True for c in corners)

    def test_counterclockwise(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            z = zono(rng.normal(size=2), rng.normal(size=(2, int(rng.integers(2, 7)))))
            v = boundary_polygon_2d(z)
            area2 = float(np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1]))
            assert area2 > 0.0

    def test_rejects_other_dimensions(self):
        with pytest.raises(ValueError):
            boundary_polygon_2d(Zonotope(np.zeros(3), np.eye(3)))


class TestImmutability:
    def test_arrays_read_only(self):
        z = zono([0, 0], np.eye(2))
        with pytest.raises(ValueError):
            z.center[0] = 5.0
        with pytest.raises(ValueError):
            z.generators[0, 0] = 5.0
