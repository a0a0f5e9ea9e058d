# pcpolab/rollout/targets.py
from __future__ import annotations
from dataclasses import replace
from typing import Tuple

import numpy as np

from pcpolab.errors import ContractViolation
from pcpolab.nn.mlp import Mlp
from pcpolab.rollout.collect import Batch, SampleSet


def q_input(states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Critic input: state and action side by side."""
    return np.concatenate([np.atleast_2d(states), np.atleast_2d(actions)], axis=1)


def n_step_returns(rewards: np.ndarray, dones: np.ndarray, bootstrap: float, gamma: float) -> np.ndarray:
    """Forward-view returns to the end of the segment.

    R_t = r_t + gamma * R_{t+1}; the tail is `bootstrap` unless the last
    transition ended an episode, and any done cuts the sum.
    """
    out = np.empty(len(rewards))
    running = 0.0 if (len(dones) and dones[-1]) else float(bootstrap)
    for t in range(len(rewards) - 1, -1, -1):
        if dones[t]:
            running = 0.0
        running = rewards[t] + gamma * running
        out[t] = running
    return out


def compute_targets(sample_set: SampleSet, value_net: Mlp, value_params: np.ndarray,
                    risk_net: Mlp, risk_params: np.ndarray, gamma: float) -> SampleSet:
    if not 0 < gamma <= 1:
        raise ContractViolation(f"gamma must lie in (0, 1], got {gamma}")
    if len(sample_set) == 0:
        return replace(sample_set, reward_targets=np.zeros(0), risk_targets=np.zeros(0))
    last = sample_set.transitions[-1]
    x_boot = q_input(last.s_next[None, :], last.a_next[None, :])
    q_boot = float(value_net.value(value_params, x_boot)[0])
    qt_boot = float(risk_net.value(risk_params, x_boot)[0])
    dones = sample_set.dones
    return replace(
        sample_set,
        reward_targets=n_step_returns(sample_set.rewards, dones, q_boot, gamma),
        risk_targets=n_step_returns(sample_set.risks, dones, qt_boot, gamma),
    )


def surrogate_weights(batch: Batch, value_net: Mlp, value_params: np.ndarray,
                      risk_net: Mlp, risk_params: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Q(s, a) and Q~(s, a) at the stored pairs."""
    batch.require_nonempty()
    x = q_input(batch.states, batch.actions)
    return value_net.value(value_params, x), risk_net.value(risk_params, x)
