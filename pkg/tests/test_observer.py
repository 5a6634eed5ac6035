import numpy as np
import pytest

from zonofd.observer import (
    VERDICT_CONSISTENT,
    VERDICT_INDETERMINATE,
    VERDICT_ISOLATED,
    Diagnosis,
    SVOState,
    diagnose,
    excluding_degree_residual,
    output_set,
    residual,
    svo_step,
)
from zonofd.plant import sample_in_zonotope, step_plant
from zonofd.setops import Zonotope, contains_point


def obs_state(mode, center, gens, gain=None):
    return SVOState(
        mode=mode,
        xhat=Zonotope(np.asarray(center, dtype=float), gens),
        gain=np.zeros((2, 2)) if gain is None else gain,
    )


class TestSvoStep:
    def test_open_loop_healthy(self, model):
        obs = obs_state(0, [0.5, 0.5], 0.5 * np.eye(2))
        u = np.array([-0.7, 3.0])
        nxt = svo_step(model, obs, u, np.zeros(2), eps1=0.01, reduction_order=None)
        assert np.allclose(nxt.xhat.center, model.A @ [0.5, 0.5] + model.B @ u)
        expect = np.hstack(
            (model.A @ (0.5 * np.eye(2)), np.zeros((2, 2)), model.E @ (0.5 * np.eye(2)))
        )
        assert np.allclose(nxt.xhat.generators, expect)

    def test_fault_generator_column(self, model_generic_bounds):
        # With the generic half-open bound, the fault column is
        # ((1 - eps1) / 2) * B e_1 * u_1.
        model = model_generic_bounds
        eps1 = 0.01
        obs = obs_state(1, [0.55, 0.55], None)
        u = np.array([-0.7, 3.0])
        nxt = svo_step(model, obs, u, np.zeros(2), eps1=eps1, reduction_order=None)
        cols = nxt.xhat.generators
        # layout: [(A-LC)H (empty), -L F H_eta (zero), fault, E H_w]
        fault_col = cols[:, 2]
        assert np.allclose(fault_col, ((1 - eps1) / 2) * model.B[:, 0] * (-0.7))

    def test_column_bookkeeping(self, model):
        obs = obs_state(1, [0.0, 0.0], np.ones((2, 3)), gain=0.1 * np.eye(2))
        nxt = svo_step(model, obs, [1.0, 1.0], np.zeros(2), eps1=0.01, reduction_order=None)
        # 3 state + 2 noise + 1 fault + 2 disturbance
        assert nxt.xhat.order == 8
        healthy = obs_state(0, [0.0, 0.0], np.ones((2, 3)), gain=0.1 * np.eye(2))
        nxt0 = svo_step(model, healthy, [1.0, 1.0], np.zeros(2), eps1=0.01, reduction_order=None)
        assert nxt0.xhat.order == 7
        # residual pre-reduction: state + fault + noise + disturbance blocks,
        # plus the measurement-noise block appended by the output map
        r = residual(np.zeros(2), output_set(model, nxt))
        assert r.generators.shape[1] == 3 + 1 + 2 + 2 + 2

    def test_reduction_applied(self, model):
        obs = obs_state(0, [0.0, 0.0], np.ones((2, 30)))
        nxt = svo_step(model, obs, [0.0, 0.0], np.zeros(2), eps1=0.01, reduction_order=5)
        assert nxt.xhat.order <= 5

    def test_monte_carlo_containment(self, model):
        # true mode == observer mode  =>  the state set keeps the state.
        rng = np.random.default_rng(99)
        mode = model.true_mode(1, g=0.55)
        for trial in range(30):
            x = sample_in_zonotope(Zonotope(np.array([0.55, 0.55]), 0.5 * np.eye(2)), rng)
            obs = obs_state(1, [0.55, 0.55], 0.5 * np.eye(2), gain=rng.normal(scale=0.2, size=(2, 2)))
            for _ in range(12):
                u = rng.normal(scale=1.5, size=2)
                w = sample_in_zonotope(model.W, rng)
                v = sample_in_zonotope(model.V, rng)
                _, y = step_plant(model, x, u, mode, w, v)
                x = model.A @ x + model.B @ (mode.G @ u) + model.E @ w
                obs = svo_step(model, obs, u, y, eps1=0.01, reduction_order=20)
                assert contains_point(obs.xhat, x, tol=1e-7)


class TestOutputSet:
    def test_identity_output_map(self, model):
        obs = obs_state(0, [0.3, 0.4], 0.2 * np.eye(2))
        out = output_set(model, obs)
        assert np.allclose(out.center, [0.3, 0.4])
        assert np.allclose(out.generators, np.hstack((0.2 * np.eye(2), 0.01 * np.eye(2))))

    def test_singleton_state(self, model):
        obs = obs_state(0, [1.0, -1.0], None)
        out = output_set(model, obs)
        assert np.allclose(out.center, [1.0, -1.0])
        assert np.allclose(out.generators, 0.01 * np.eye(2))

    def test_f_norm_additivity(self, model):
        rng = np.random.default_rng(4)
        H = rng.normal(size=(2, 5))
        obs = obs_state(0, [0.0, 0.0], H)
        out = output_set(model, obs)
        expect = np.sum((model.C @ H) ** 2) + np.sum((model.F @ (0.1 * np.eye(2))) ** 2)
        assert np.sum(out.generators**2) == pytest.approx(expect)


class TestResidual:
    def test_perfect_match(self):
        yhat = Zonotope(np.array([1.0, 2.0]), 0.1 * np.eye(2))
        r = residual([1.0, 2.0], yhat)
        assert np.allclose(r.center, 0.0)
        assert contains_point(r, np.zeros(2))

    def test_far_outside(self):
        yhat = Zonotope(np.array([0.0, 0.0]), 0.1 * np.eye(2))
        r = residual([1.0, 0.0], yhat)
        assert not contains_point(r, np.zeros(2))

    def test_center_identity_two_paths(self, model):
        # residual center equals the expanded update formula
        rng = np.random.default_rng(8)
        for _ in range(20):
            L = rng.normal(size=(2, 2))
            xc = rng.normal(size=2)
            H = rng.normal(size=(2, 3))
            u = rng.normal(size=2)
            y_k = rng.normal(size=2)
            y_next = rng.normal(size=2)
            obs = obs_state(1, xc, H, gain=L)
            stepped = svo_step(model, obs, u, y_k, eps1=0.01, reduction_order=None)
            r = residual(y_next, output_set(model, stepped))
            A, B, C, E, F = model.A, model.B, model.C, model.E, model.F
            _, mid, _ = model.fault_term(1, 0.01)
            mid_bu = B @ u + (mid - 1.0) * B[:, 0] * u[0]
            explicit = (
                y_next
                - C @ (A - L @ C) @ xc
                - C @ mid_bu
                - C @ L @ y_k
                - C @ model.E @ model.W.center
                + C @ L @ F @ model.V.center
                - F @ model.V.center
            )
            assert np.allclose(r.center, explicit, atol=1e-12)

    def test_matched_healthy_run_keeps_origin(self, model):
        rng = np.random.default_rng(31)
        mode = model.true_mode(0)
        x = np.array([0.6, 0.6])
        obs = obs_state(0, [0.55, 0.55], 0.5 * np.eye(2), gain=0.05 * np.eye(2))
        u = np.array([-0.7, 3.0])
        y = model.C @ x + model.F @ sample_in_zonotope(model.V, rng)
        for _ in range(50):
            w = sample_in_zonotope(model.W, rng)
            v_next = sample_in_zonotope(model.V, rng)
            x = model.A @ x + model.B @ u + model.E @ w
            y_next = model.C @ x + model.F @ v_next
            obs = svo_step(model, obs, u, y, eps1=0.01, reduction_order=20)
            r = residual(y_next, output_set(model, obs))
            assert contains_point(r, np.zeros(2))
            y = y_next


class TestDiagnose:
    def _residuals(self, flags):
        out = []
        for inside in flags:
            center = np.zeros(2) if inside else np.array([5.0, 0.0])
            out.append(Zonotope(center, 0.1 * np.eye(2)))
        return out

    def test_isolation(self):
        d = diagnose(self._residuals([False, True, False]))
        assert d == Diagnosis(VERDICT_ISOLATED, 1, (1,), (False, True, False))

    def test_all_consistent(self):
        d = diagnose(self._residuals([True, True, True]))
        assert d.verdict == VERDICT_CONSISTENT
        assert d.consistent == (0, 1, 2)
        assert d.isolated_mode is None

    def test_none_consistent(self):
        d = diagnose(self._residuals([False, False, False]))
        assert d.verdict == VERDICT_INDETERMINATE
        assert d.consistent == ()

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            diagnose([])


class TestNoFalseAlarm:
    def test_random_stabilizing_gains_never_exclude_true_mode(self, model):
        # 10^4 randomized steps: gains drawn in the stability ball, random
        # inputs, true mode matching one observer of the bank.
        from zonofd.iqp import stability_ball
        from zonofd.observer import diagnose

        rng = np.random.default_rng(123)
        ball = stability_ball(model.A, model.C, 0.001)
        steps = 0
        while steps < 10_000:
            true_idx = int(rng.integers(0, 3))
            mode = model.true_mode(true_idx, 0.55 if true_idx else None)
            x = sample_in_zonotope(Zonotope(np.array([0.55, 0.55]), 0.5 * np.eye(2)), rng)
            observers = [obs_state(i, [0.55, 0.55], 0.5 * np.eye(2)) for i in range(3)]
            y = model.C @ x + model.F @ sample_in_zonotope(model.V, rng)
            for _ in range(25):
                xi = rng.normal(scale=0.4, size=4)
                while ball.violation(xi) > 0:
                    xi *= 0.7
                L = xi.reshape(2, 2, order="F")
                u = rng.normal(scale=1.5, size=2)
                w = sample_in_zonotope(model.W, rng)
                v_next = sample_in_zonotope(model.V, rng)
                x = model.A @ x + model.B @ (mode.G @ u) + model.E @ w
                y_next = model.C @ x + model.F @ v_next
                observers = [
                    svo_step(model, obs.with_gain(L), u, y, eps1=0.01, reduction_order=20)
                    for obs in observers
                ]
                diag = diagnose([residual(y_next, output_set(model, obs)) for obs in observers])
                assert diag.membership[true_idx], f"true mode {true_idx} excluded"
                y = y_next
                steps += 1


def test_excluding_degree_residual_delegates():
    r = Zonotope(np.array([3.0, 4.0]), np.eye(2))
    assert excluding_degree_residual(r) == pytest.approx(12.5)
