import numpy as np
import pytest

from pcpolab.envs.base import DoneReason
from pcpolab.envs.intersection import (
    IntersectionEnv, IntersectionState, intersection_reset, intersection_step, min_pairwise_distance,
    vehicle_positions,
)


def _state(l, v, passed=(False, False, False), steps=0):
    return IntersectionState(l=np.array(l, dtype=float), v=np.array(v, dtype=float), passed=passed, steps=steps)


def test_plain_step_costs_one():
    out = intersection_step(_state([-30, -30, -30], [10, 10, 10]), np.zeros(3))
    assert out.reward == -1.0 and out.risk == 0.0 and not out.done
    assert np.allclose(out.next_state.l, [-29, -29, -29])


def test_kinematics():
    out = intersection_step(_state([-30, -30, -30], [10, 10, 10]), np.array([2.0, -2.0, 0.0]))
    assert np.allclose(out.next_state.l, [-30 + 1.0 + 0.01, -30 + 1.0 - 0.01, -29.0])
    assert np.allclose(out.next_state.v, [10.2, 9.8, 10.0])


def test_acceleration_and_speed_are_clipped():
    out = intersection_step(_state([-30, -30, -30], [13.9, 6.1, 10]), np.array([10.0, -10.0, 0.0]))
    assert np.allclose(out.next_state.v, [14.0, 6.0, 10.0])
    assert out.next_state.l[0] == pytest.approx(-30 + 1.39 + 0.5 * 3 * 0.01)


def test_passing_and_success_rewards():
    out = intersection_step(_state([9.5, -30, -30], [10, 10, 10]), np.zeros(3))
    assert out.reward == pytest.approx(9.0) and not out.done

    out = intersection_step(_state([20, 20, 9.5], [10, 10, 10], passed=(True, True, False)), np.zeros(3))
    assert out.reward == pytest.approx(19.0)
    assert out.done and out.done_reason is DoneReason.SUCCESS


def test_collision_at_conflict_point():
    out = intersection_step(_state([1.15, -2.35, -30], [6, 6, 6]), np.zeros(3))
    assert out.done and out.done_reason is DoneReason.COLLISION
    assert out.risk == 50.0


def test_timeout():
    out = intersection_step(_state([-30, -30, -30], [6, 6, 6], steps=199), np.zeros(3))
    assert out.done and out.done_reason is DoneReason.TIMEOUT


def test_geometry():
    pos = vehicle_positions(np.array([0.0, 0.0, 0.0]))
    assert np.allclose(pos, [[0, -1.75], [1.75, 0], [-1.75, 0]])
    assert min_pairwise_distance(np.array([0.0, 0.0, 0.0])) == pytest.approx(np.hypot(1.75, 1.75))


def test_reset_ranges_and_no_initial_collision():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        st = intersection_reset(rng)
        assert np.all((st.l >= -40) & (st.l <= -15))
        assert np.all((st.v >= 6) & (st.v <= 14))
        assert min_pairwise_distance(st.l) > 2.5


def test_env_observation_layout():
    env = IntersectionEnv()
    obs = env.reset(np.random.default_rng(3))
    assert obs.shape == (6,)
    assert np.array_equal(obs[0::2], env.state.l)
    assert np.array_equal(obs[1::2], env.state.v)
    assert np.isnan(env.deviation())
