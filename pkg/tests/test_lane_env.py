import numpy as np
import pytest

from pcpolab.envs.base import DoneReason
from pcpolab.envs.lane import LaneKeepingEnv, LaneState, VehicleParams, lane_reset, lane_reward, lane_step
from pcpolab.envs.track import generate_track
from pcpolab.errors import NumericalError

TRACK = generate_track()


def test_equilibrium_on_straight():
    p = VehicleParams()
    out = lane_step(TRACK, LaneState(d=0.0, beta=0.0, s=10.0), 0.0, p)
    nxt = out.next_state
    assert out.reward == 0.0 and out.risk == 0.0 and not out.done
    assert (nxt.d, nxt.beta, nxt.v_y, nxt.yaw_rate) == (0.0, 0.0, 0.0, 0.0)
    assert nxt.s == pytest.approx(10.0 + p.v_x * p.dt)
    assert nxt.steps == 1


def test_reward_formula():
    assert lane_reward(0.3, 0.1) == pytest.approx(-1.01)
    assert lane_reward(0.0, 0.0) == 0.0


def test_leaving_the_lane_carries_risk():
    out = lane_step(TRACK, LaneState(d=1.49, beta=0.3, s=10.0), 0.0)
    assert out.done and out.done_reason is DoneReason.OFF_LANE
    assert out.risk == 100.0
    assert out.next_state.d > 1.5


def test_timeout():
    p = VehicleParams(max_steps=5)
    out = lane_step(TRACK, LaneState(d=0.0, beta=0.0, s=10.0, steps=4), 0.0, p)
    assert out.done and out.done_reason is DoneReason.TIMEOUT and out.risk == 0.0


def test_steering_is_clipped():
    s = LaneState(d=0.0, beta=0.0, s=10.0)
    a = lane_step(TRACK, s, 10.0).next_state
    b = lane_step(TRACK, s, np.pi / 4).next_state
    assert a == b


def test_lateral_dynamics_settle_without_steering():
    state = LaneState(d=0.0, beta=0.0, v_y=1.0, yaw_rate=0.5, s=0.0)
    for _ in range(100):
        state = lane_step(TRACK, state, 0.0).next_state
    assert abs(state.v_y) < 1e-2
    assert abs(state.yaw_rate) < 1e-2


def test_blow_up_is_an_error():
    with pytest.raises(NumericalError):
        lane_step(TRACK, LaneState(d=0.0, beta=0.0, v_y=np.inf, s=10.0), 0.0)


def test_reset_ranges_and_coverage():
    rng = np.random.default_rng(0)
    states = [lane_reset(TRACK, rng) for _ in range(10_000)]
    d = np.array([st.d for st in states])
    beta = np.array([st.beta for st in states])
    s = np.sort([st.s for st in states])
    assert np.all(np.abs(d) <= 0.5)
    assert np.all(np.abs(beta) <= 0.1)
    gaps = np.diff(np.concatenate([[0.0], s, [TRACK.total_length]]))
    assert gaps.max() < 0.05 * TRACK.total_length


def test_same_seed_same_episode():
    def episode(seed):
        env = LaneKeepingEnv(TRACK)
        rng = np.random.default_rng(seed)
        obs = [env.reset(rng)]
        for k in range(20):
            env.step(np.array([0.01 * (k % 3 - 1)]))
            obs.append(env.observation())
        return np.array(obs)

    assert np.array_equal(episode(5), episode(5))
    assert not np.array_equal(episode(5), episode(6))


def test_env_interface():
    env = LaneKeepingEnv(TRACK)
    env.set_state(d=-0.4, beta=0.05)
    assert np.array_equal(env.observation(), [-0.4, 0.05])
    assert env.deviation() == 0.4
    assert env.obs_dim == 2 and env.action_low.shape == (1,)
