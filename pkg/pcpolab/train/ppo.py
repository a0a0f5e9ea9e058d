# pcpolab/train/ppo.py
"""Clipped-surrogate baseline on the same networks and rollouts.

No risk constraint: the risk critic is still fitted and risk still logged,
so the comparison with the constrained learners is like for like.
"""
from __future__ import annotations

import numpy as np

from pcpolab.nn.fisher import mean_kl
from pcpolab.nn.gaussian import log_prob
from pcpolab.nn.mlp import Mlp
from pcpolab.rollout.targets import surrogate_weights
from pcpolab.solver.subproblem import weighted_score_gradient
from pcpolab.train.loop import TrainState, collect_round
from pcpolab.train.metrics import IterationResult, UpdateDiagnostics
from pcpolab.utils.logging import get_logger

log = get_logger(__name__)

CLIP_TOL = 1e-12


def clipped_surrogate(ratio: np.ndarray, adv: np.ndarray, eps: float) -> float:
    """mean(min(ratio * A, clip(ratio, 1-eps, 1+eps) * A))."""
    return float(np.mean(np.minimum(ratio * adv, np.clip(ratio, 1 - eps, 1 + eps) * adv)))


def clipped_surrogate_grad(policy: Mlp, theta: np.ndarray, states: np.ndarray, actions: np.ndarray,
                           logp_old: np.ndarray, adv: np.ndarray, eps: float) -> np.ndarray:
    """Gradient of the clipped surrogate; samples whose clip strictly binds contribute nothing.

    The ratio at theta_old is 1 only up to rounding, so binding is judged
    beyond CLIP_TOL; with eps = 0 this is the plain surrogate gradient.
    """
    ratio = np.exp(log_prob(policy.forward(theta, states), actions) - logp_old)
    binds = ((adv > 0) & (ratio > 1 + eps + CLIP_TOL)) | ((adv < 0) & (ratio < 1 - eps - CLIP_TOL))
    weights = np.where(binds, 0.0, ratio * adv)
    return weighted_score_gradient(policy, theta, states, actions, weights)


def ppo_iteration(state: TrainState) -> IterationResult:
    cfg, n = state.config, state.nets
    state.iteration += 1
    sets, batch = collect_round(state)
    episodes = [ep for s in sets for ep in s.episodes]

    adv, _ = surrogate_weights(batch, n.value, state.omega, n.risk, state.phi)
    if cfg.center_q:
        adv = adv - adv.mean()
    states, actions, logp_old = batch.states, batch.actions, batch.log_probs
    theta_old = state.theta
    theta = theta_old
    for _ in range(cfg.ppo_passes):
        grad = clipped_surrogate_grad(n.policy, theta, states, actions, logp_old, adv, cfg.ppo_epsilon)
        theta, ok = state.policy_opt.step(theta, -grad)
        if not ok:
            break

    kl = mean_kl(n.policy, theta, theta_old, states)
    diag = UpdateDiagnostics(iteration=state.iteration, step_norm=float(np.linalg.norm(theta - theta_old)),
                             post_update_kl=kl, branch="ppo")
    state.theta = theta
    return IterationResult(state.iteration, episodes, len(sets), None, post_update_kl=kl, diagnostics=diag)
