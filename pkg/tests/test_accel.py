import numpy as np
import pytest

from rkhs_fusion import _accel
from rkhs_fusion.agent import agent_operator_norm_profile

numba_only = pytest.mark.skipif(_accel.numba is None, reason="numba not installed")


def both_paths(monkeypatch, func, *args):
    monkeypatch.delenv(_accel.ENV_FLAG, raising=False)
    fast = func(*args)
    monkeypatch.setenv(_accel.ENV_FLAG, "1")
    slow = func(*args)
    return fast, slow


class TestFlag:
    @pytest.mark.parametrize("value,enabled", [("1", False), ("true", False), ("0", True)])
    def test_env_flag(self, monkeypatch, value, enabled):
        monkeypatch.setenv(_accel.ENV_FLAG, value)
        assert _accel.numba_enabled() is (enabled and _accel.numba is not None)


@numba_only
class TestParity:
    def test_agent_norm_sweep(self, monkeypatch, agents):
        for a in agents:
            fast, slow = both_paths(monkeypatch, agent_operator_norm_profile, a, 3.0)
            np.testing.assert_allclose(fast, slow, rtol=1e-10)

    def test_gradient_descent(self, monkeypatch, rng):
        m = rng.standard_normal((6, 6))
        a = m @ m.T + np.eye(6)
        b = rng.standard_normal(6)
        step = 0.5 / np.linalg.eigvalsh(a)[-1]
        fast, slow = both_paths(monkeypatch, _accel.projected_gradient_descent,
                                a, b, np.eye(6), np.zeros(6), step, 500)
        np.testing.assert_allclose(fast, slow, rtol=1e-10, atol=1e-14)

    def test_power_iteration(self, monkeypatch, rng):
        q = np.linalg.qr(rng.standard_normal((4, 4)))[0]
        a = q @ np.diag([1.0, 0.6, 0.3, 0.1]) @ q.T
        v0 = rng.standard_normal(4)
        (vf, itf, rf), (vs, its, rs) = both_paths(monkeypatch, _accel.power_iteration,
                                                  a, v0, 1000, 1e-12)
        assert itf == its
        np.testing.assert_allclose(vf, vs, atol=1e-12)


class TestNumpyPath:
    def test_gradient_descent_solves(self, monkeypatch, rng):
        monkeypatch.setenv(_accel.ENV_FLAG, "1")
        m = rng.standard_normal((4, 4))
        a = m @ m.T + np.eye(4)
        b = rng.standard_normal(4)
        x = _accel.projected_gradient_descent(a, b, np.eye(4), np.zeros(4),
                                              0.5 / np.linalg.eigvalsh(a)[-1], 5000)
        np.testing.assert_allclose(x, np.linalg.solve(a, b), atol=1e-8)

    def test_power_iteration_zero_matrix(self, monkeypatch):
        monkeypatch.setenv(_accel.ENV_FLAG, "1")
        v, its, resid = _accel.power_iteration(np.zeros((2, 2)), np.ones(2), 10, 1e-8)
        assert resid == pytest.approx(1.0) and its == 0
