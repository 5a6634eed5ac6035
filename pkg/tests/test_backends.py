"""The compiled kernels and the pure-Python twins must agree."""

import numpy as np
import pytest

from zonofd import _kernels_py
from zonofd import backend

try:
    from zonofd import _kernels
except ImportError:
    _kernels = None

pytestmark = pytest.mark.skipif(_kernels is None, reason="compiled backend not built")

BACKENDS = [_kernels_py] + ([_kernels] if _kernels is not None else [])


def rand_psd(rng, d, shift=0.1):
    M = rng.normal(size=(d, d))
    return M @ M.T + shift * np.eye(d)


class TestCholQuadMin:
    def test_agreement(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            d = int(rng.integers(1, 8))
            O1 = rand_psd(rng, d)
            O2 = rng.normal(size=d)
            ok_p, val_p, mu_p = _kernels_py.chol_quad_min(O1, O2)
            ok_c, val_c, mu_c = _kernels.chol_quad_min(O1, O2)
            assert ok_p == ok_c
            assert val_c == pytest.approx(val_p, rel=1e-12, abs=1e-14)
            assert np.allclose(mu_c, mu_p, atol=1e-12)

    def test_rejects_indefinite(self):
        O1 = np.diag([1.0, -1.0])
        for mod in BACKENDS:
            ok, _, _ = mod.chol_quad_min(O1, np.zeros(2))
            assert not ok

    def test_rejects_tiny_pivot(self):
        O1 = np.diag([1.0, 1e-14])
        for mod in BACKENDS:
            ok, _, _ = mod.chol_quad_min(O1, np.zeros(2))
            assert not ok


class TestPsdGammaUpper:
    def test_agreement(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            d = int(rng.integers(2, 7))
            P = rand_psd(rng, d)
            Q = rand_psd(rng, d, shift=0.0)
            ok_p, g_p = _kernels_py.psd_gamma_upper(P, Q, 1e-10)
            ok_c, g_c = _kernels.psd_gamma_upper(P, Q, 1e-10)
            assert ok_p == ok_c
            assert g_c == pytest.approx(g_p, abs=1e-8)


class TestDinkelbachBisect:
    def test_agreement(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            d = int(rng.integers(1, 5))
            N = rng.normal(size=(d + 1, d))
            n0 = rng.normal(size=d + 1)
            M = rng.normal(size=(d + 1, d))
            m0 = rng.normal(size=d + 1)
            P1, P2, P3 = N.T @ N, 2 * n0 @ N, float(n0 @ n0) + 0.3
            Q1, Q2, Q3 = M.T @ M, 2 * m0 @ M, float(m0 @ m0) + 0.4
            ok, hi = _kernels_py.psd_gamma_upper(P1, Q1, 1e-9)
            assert ok
            out_p = _kernels_py.dinkelbach_bisect(P1, P2, P3, Q1, Q2, Q3, 0.0, hi, 1e-9)
            out_c = _kernels.dinkelbach_bisect(P1, P2, P3, Q1, Q2, Q3, 0.0, hi, 1e-9)
            assert out_p[0] == out_c[0]
            assert out_c[1] == pytest.approx(out_p[1], abs=1e-9)
            assert np.allclose(out_c[2], out_p[2], atol=1e-8)


class TestAdmmQp:
    def _problem(self, rng, d, with_ellipsoid):
        q, _ = np.linalg.qr(rng.normal(size=(d, d)))
        theta = np.abs(rng.normal(size=d))
        theta[rng.integers(0, d)] = 0.0
        lin = rng.normal(size=d)
        box = 1.5 * np.ones(d)
        half = d // 2
        starts = np.array([0, half], dtype=np.int64)
        lens = np.array([half, d - half], dtype=np.int64)
        kinds = np.array([0, 1 if with_ellipsoid else 0], dtype=np.int64)
        radii = np.array([1.0, 0.8])
        centers = np.zeros(d)
        centers[:half] = rng.normal(scale=0.1, size=half)
        vmats = [None, None]
        svals = [None, None]
        if with_ellipsoid:
            Mmap = rng.normal(size=(d - half, d - half)) + 2 * np.eye(d - half)
            U, s, Vt = np.linalg.svd(Mmap)
            b = rng.normal(scale=0.2, size=d - half)
            centers[half:] = Vt.T @ ((U.T @ b) / s)
            vmats[1] = np.ascontiguousarray(Vt.T)
            svals[1] = s.copy()
        return (q, theta, lin, 0.3, -box, box, starts, lens, kinds, radii, centers,
                vmats, svals)

    @pytest.mark.parametrize("with_ellipsoid", [False, True])
    def test_agreement(self, with_ellipsoid):
        rng = np.random.default_rng(3)
        for trial in range(10):
            d = int(rng.integers(4, 9))
            args = self._problem(rng, d, with_ellipsoid)
            out_p = _kernels_py.admm_qp(*args, 1.0, 1e-9, 50_000)
            out_c = _kernels.admm_qp(*args, 1.0, 1e-9, 50_000)
            # same converged objective and bound
            assert out_c[3] == pytest.approx(out_p[3], abs=1e-6)
            assert out_c[4] == pytest.approx(out_p[4], abs=1e-6)
            assert out_p[5] == _kernels_py.OK
            assert out_c[5] == _kernels.OK
            # both report a tight certified gap
            assert out_p[3] - out_p[4] < 1e-5
            assert out_c[3] - out_c[4] < 1e-5

    def test_mu_feasible_both(self):
        rng = np.random.default_rng(4)
        args = self._problem(rng, 6, True)
        for mod in BACKENDS:
            out = mod.admm_qp(*args, 1.0, 1e-9, 50_000)
            mu = out[1]
            starts, lens, kinds, radii, centers = args[6], args[7], args[8], args[9], args[10]
            vmats, svals = args[11], args[12]
            for b in range(2):
                s, ln = starts[b], lens[b]
                blockc = centers[s:s + ln]
                if kinds[b] == 0:
                    assert np.linalg.norm(mu[s:s + ln] - blockc) <= radii[b] + 1e-15
                else:
                    w = svals[b] ** 2
                    qq = vmats[b].T @ (mu[s:s + ln] - blockc)
                    assert float(np.sum(w * qq * qq)) <= radii[b] ** 2 + 1e-12


def test_backend_module_exports():
    assert backend.BACKEND_NAME in ("python", "cython")
    for name in ("chol_quad_min", "psd_gamma_upper", "dinkelbach_bisect", "admm_qp"):
        assert hasattr(backend, name)
