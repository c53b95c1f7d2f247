import math

import numpy as np
import pytest

from vctrl.errors import IntegrationDivergedError, ParameterError
from vctrl.integrator import IntegratorConfig, Trajectory, integrate, sample_at
from vctrl.model import NORM_INITIAL, default_params
from vctrl.policy import ControlPolicy

P = default_params()


def zero(t, x, u, p):
    return np.zeros_like(x)


def decay(t, x, u, p):
    return -x


def test_zero_system_keeps_initial_state():
    x0 = [0.3, -2.0, 7.5]
    traj = integrate(zero, x0, (0, 0, 1), None, IntegratorConfig(output_points=11), 5.0)
    np.testing.assert_array_equal(traj.states, np.tile(x0, (11, 1)))


def test_adaptive_exponential_decay():
    traj = integrate(decay, [1.0], (0, 0, 1), None, IntegratorConfig(rel_tol=1e-10, abs_tol=1e-14), 1.0)
    assert traj.states[-1, 0] == pytest.approx(math.exp(-1), abs=1e-8)
    assert traj.states[-1, 0] == pytest.approx(0.3678794, abs=1e-7)


def rk4_error(step):
    cfg = IntegratorConfig(method="rk4", step=step, output_points=2)
    return abs(integrate(decay, [1.0], (0, 0, 1), None, cfg, 1.0).states[-1, 0] - math.exp(-1))


@pytest.mark.parametrize("h", [0.2, 0.1, 0.05])
def test_rk4_is_fourth_order(h):
    ratio = rk4_error(h) / rk4_error(h / 2)
    assert 14 <= ratio <= 18


def test_trajectory_grid():
    traj = integrate("normalized", NORM_INITIAL, (0, 0, 1), P, IntegratorConfig(), 84)
    assert traj.times[0] == 0 and traj.times[-1] == 84
    assert traj.times.size == 337  # one sample per 0.25 day
    assert np.all(np.diff(traj.times) > 0)
    assert traj.states.shape == (337, 6)
    assert traj.scale == "normalized"


def test_breakpoint_split_matches_sequential_runs():
    cfg = IntegratorConfig(output_points=2)
    u1, u2, t_star, t_f = (0.1, 0.3, 0.9), (0.4, 0.05, 0.7), 17.3, 40.0
    policy = ControlPolicy([0.0, t_star, t_f], [u1, u2])
    joined = integrate("normalized", NORM_INITIAL, policy, P, cfg, t_f).states[-1]
    first = integrate("normalized", NORM_INITIAL, u1, P, cfg, t_star).states[-1]
    second = integrate("normalized", first, u2, P, cfg, t_f - t_star).states[-1]
    np.testing.assert_allclose(joined, second, rtol=1e-13, atol=1e-15)


def test_rk4_split_matches_sequential_runs():
    cfg = IntegratorConfig(method="rk4", step=0.05, output_points=2)
    u1, u2 = (0.0, 0.2, 1.0), (0.3, 0.0, 0.5)
    policy = ControlPolicy([0.0, 10.0, 20.0], [u1, u2])
    joined = integrate("normalized", NORM_INITIAL, policy, P, cfg, 20.0).states[-1]
    first = integrate("normalized", NORM_INITIAL, u1, P, cfg, 10.0).states[-1]
    second = integrate("normalized", first, u2, P, cfg, 10.0).states[-1]
    np.testing.assert_allclose(joined, second, rtol=1e-14, atol=1e-16)


@pytest.mark.parametrize("u", [(0, 0, 1), (0.1, 0.05, 0.8), (0.5, 0.3, 0.5), (1, 1, 1)])
def test_adaptive_agrees_with_fine_rk4(u):
    cfg = IntegratorConfig()
    a = integrate("normalized", NORM_INITIAL, u, P, cfg, 84).states
    b = integrate("normalized", NORM_INITIAL, u, P, IntegratorConfig(method="rk4", step=0.005), 84).states
    tol = 10 * (cfg.rel_tol * np.abs(a).max() + cfg.abs_tol)
    assert np.abs(a - b).max() <= tol


def test_divergence_reports_time():
    def blowup(t, x, u, p):
        return x**2

    with pytest.raises(IntegrationDivergedError) as err:
        integrate(blowup, [1.0], (0, 0, 1), None, IntegratorConfig(method="rk4", step=0.01), 2.0)
    assert 0.9 <= err.value.t <= 1.1


def test_adaptive_divergence_raises():
    def blowup(t, x, u, p):
        return x**2

    with pytest.raises(IntegrationDivergedError):
        integrate(blowup, [1.0], (0, 0, 1), None, IntegratorConfig(), 2.0)


def test_policy_must_cover_horizon():
    policy = ControlPolicy.constant((0, 0, 1), 10.0)
    with pytest.raises(ParameterError):
        integrate("normalized", NORM_INITIAL, policy, P, IntegratorConfig(), 20.0)


def test_emitted_states_clamped_nonnegative():
    traj = integrate("normalized", NORM_INITIAL, (1, 1, 0.01), P, IntegratorConfig(), 84)
    assert traj.states.min() >= 0


class TestSampleAt:
    traj = Trajectory(np.array([0.0, 1.0, 2.0]), np.array([[0.0, 10.0], [2.0, 20.0], [6.0, 0.0]]))

    def test_grid_point(self):
        np.testing.assert_array_equal(sample_at(self.traj, 1.0), [2.0, 20.0])

    def test_midpoint(self):
        np.testing.assert_allclose(sample_at(self.traj, 1.5), [4.0, 10.0])

    def test_approaches_final_state(self):
        for eps in (1e-3, 1e-6, 1e-9):
            np.testing.assert_allclose(sample_at(self.traj, 2.0 - eps), [6.0, 0.0], atol=30 * eps)
        np.testing.assert_array_equal(sample_at(self.traj, 2.0), [6.0, 0.0])

    @pytest.mark.parametrize("t", [-0.1, 2.5])
    def test_out_of_range(self, t):
        with pytest.raises(ParameterError):
            sample_at(self.traj, t)


@pytest.mark.parametrize(
    "kwargs", [{"method": "euler"}, {"step": 0}, {"rel_tol": -1}, {"output_points": 1}]
)
def test_config_validation(kwargs):
    with pytest.raises(ParameterError):
        IntegratorConfig(**kwargs)
