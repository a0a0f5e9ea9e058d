# pcpolab/train/loop.py
"""One PCPO iteration, with CPO as the single-learner case.

    collect K sets -> fit value & risk critics on all samples -> classify
    each set by its own (c_i, e_i) -> one constrained update from the pooled
    feasible sets, or the recovery step when none is feasible.
"""
from __future__ import annotations
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from pcpolab.envs.factory import make_envs
from pcpolab.errors import NumericalError, PcpoError, SolverError, UpdateRejected
from pcpolab.nn.fisher import mean_kl
from pcpolab.nn.gaussian import log_prob
from pcpolab.nn.mlp import GaussianHead, LinearHead, Mlp, MlpSpec
from pcpolab.nn.optim import make_optimizer
from pcpolab.rollout.collect import Batch, Feasibility, RolloutWorker, SampleSet, collect, make_workers
from pcpolab.rollout.dump import append_samples
from pcpolab.rollout.targets import compute_targets, q_input, surrogate_weights
from pcpolab.solver.dual import apply_update, backtrack, recovery_step, solve_dual
from pcpolab.solver.subproblem import (
    FeasibilityIndexes, ScalarTriple, Subproblem, build_subproblem, classify, solve_triple,
)
from pcpolab.train.config import TrainConfig
from pcpolab.train.metrics import IterationResult, UpdateDiagnostics
from pcpolab.utils.io import array_checksum
from pcpolab.utils.logging import get_logger

log = get_logger(__name__)


@dataclass(frozen=True)
class Networks:
    policy: Mlp
    value: Mlp
    risk: Mlp

    def as_dict(self):
        return {"policy": self.policy, "value": self.value, "risk": self.risk}


def build_networks(obs_dim: int, action_low: np.ndarray, action_high: np.ndarray,
                   hidden: Sequence[int]) -> Networks:
    hidden = tuple(hidden)
    head = GaussianHead(tuple(float(x) for x in action_low), tuple(float(x) for x in action_high))
    q_dim = obs_dim + len(action_low)
    return Networks(
        policy=Mlp(MlpSpec(obs_dim, hidden, head)),
        value=Mlp(MlpSpec(q_dim, hidden, LinearHead())),
        risk=Mlp(MlpSpec(q_dim, hidden, LinearHead())),
    )


@dataclass
class TrainState:
    config: TrainConfig
    nets: Networks
    theta: np.ndarray
    omega: np.ndarray
    phi: np.ndarray
    workers: List[RolloutWorker]
    value_opt: object
    risk_opt: object
    policy_opt: Optional[object] = None
    iteration: int = 0
    samples_path: Optional[str] = None

    def params(self):
        return {"policy": self.theta, "value": self.omega, "risk": self.phi}


def init_state(config: TrainConfig) -> TrainState:
    envs = make_envs(config.env, config.workers)
    e0 = envs[0]
    nets = build_networks(e0.obs_dim, e0.action_low, e0.action_high, config.hidden)
    # network init draws from its own stream; workers use seed + learner_id
    rng = np.random.default_rng([config.seed, 1])
    theta = nets.policy.init_params(rng)
    omega = nets.value.init_params(rng)
    phi = nets.risk.init_params(rng)
    return TrainState(
        config=config,
        nets=nets,
        theta=theta,
        omega=omega,
        phi=phi,
        workers=make_workers(envs, config.seed),
        value_opt=make_optimizer(config.optimizer, config.lr_value, nets.value.n_params),
        risk_opt=make_optimizer(config.optimizer, config.lr_risk, nets.risk.n_params),
        policy_opt=make_optimizer(config.optimizer, config.lr_policy, nets.policy.n_params),
    )


# --------- critics ---------
def _fit(net: Mlp, params: np.ndarray, x: np.ndarray, targets: np.ndarray, opt, passes: int, name: str):
    n = len(targets)
    for _ in range(passes):
        err = net.value(params, x) - targets
        loss = 0.5 * float(np.mean(err * err))
        if not math.isfinite(loss):
            log.warning("%s critic loss is non-finite; step skipped", name)
            break
        grad, _ = net.vjp(params, x, (err / n)[:, None])
        params, ok = opt.step(params, grad)
        if not ok:
            break
    return params


def update_critics(batch: Batch, nets: Networks, omega: np.ndarray, phi: np.ndarray,
                   value_opt, risk_opt, passes: int = 5) -> Tuple[np.ndarray, np.ndarray]:
    """Gradient passes on the mean TD loss (R - Q)^2 / 2 for both critics, all samples."""
    batch.require_nonempty()
    x = q_input(batch.states, batch.actions)
    omega = _fit(nets.value, omega, x, batch.reward_targets, value_opt, passes, "value")
    phi = _fit(nets.risk, phi, x, batch.risk_targets, risk_opt, passes, "risk")
    return omega, phi


def refresh_targets(state: TrainState, sets: Sequence[SampleSet]) -> List[SampleSet]:
    n = state.nets
    g = state.config.gamma
    return [compute_targets(s, n.value, state.omega, n.risk, state.phi, g) for s in sets]


def collect_round(state: TrainState) -> Tuple[List[SampleSet], Batch]:
    """Collect, then fit the critics; targets are recomputed after the critic step."""
    cfg = state.config
    before = array_checksum(state.theta)
    sets = collect(state.nets.policy, state.theta, state.workers, cfg.n_steps, state.iteration, cfg.parallel)
    if array_checksum(state.theta) != before:
        raise PcpoError("policy parameters changed during collection")
    sets = refresh_targets(state, sets)
    state.omega, state.phi = update_critics(Batch.from_sets(sets), state.nets, state.omega, state.phi,
                                            state.value_opt, state.risk_opt, cfg.critic_passes)
    sets = refresh_targets(state, sets)
    if cfg.dump_samples and state.samples_path:
        append_samples(state.samples_path, sets)
    return sets, Batch.from_sets(sets)


# --------- policy ---------
def subproblem_for(state: TrainState, batch: Batch) -> Subproblem:
    cfg, n = state.config, state.nets
    q, qt = surrogate_weights(batch, n.value, state.omega, n.risk, state.phi)
    return build_subproblem(batch, n.policy, state.theta, q, qt, cfg.d, cfg.delta, cfg.damping, cfg.center_q)


def classify_set(state: TrainState, sample_set: SampleSet) -> Tuple[SampleSet, FeasibilityIndexes]:
    subp = subproblem_for(state, Batch((sample_set,)))
    triple = solve_triple(subp, state.config.cg_iters, state.config.cg_tol)
    idx = classify(subp, triple)
    return replace(sample_set, feasibility=idx.verdict), idx


def _surrogates(state: TrainState, theta: np.ndarray, batch: Batch) -> Tuple[float, float]:
    """Importance-weighted reward and risk surrogates at `theta`."""
    n = state.nets
    q, qt = surrogate_weights(batch, n.value, state.omega, n.risk, state.phi)
    ratio = np.exp(log_prob(n.policy.forward(theta, batch.states), batch.actions) - batch.log_probs)
    return float(np.mean(ratio * q)), float(np.mean(ratio * qt))


def _line_search(state: TrainState, batch: Batch, subp: Subproblem, theta_full: np.ndarray,
                 recovering: bool) -> np.ndarray:
    theta_old = state.theta
    j0, jt0 = _surrogates(state, theta_old, batch)
    slack = max(0.0, -subp.c)

    def accept(theta: np.ndarray) -> bool:
        if mean_kl(state.nets.policy, theta, theta_old, batch.states) > state.config.delta:
            return False
        j, jt = _surrogates(state, theta, batch)
        if jt - jt0 > slack:
            return False
        return recovering or j >= j0

    return backtrack(theta_old, theta_full, accept)


def policy_update(state: TrainState, sets: Sequence[SampleSet], diag: UpdateDiagnostics) -> Tuple[np.ndarray, bool]:
    """Constrained step from the pooled feasible sets, else recovery. Returns (theta, recovered)."""
    cfg = state.config
    cg = dict(cg_iters=cfg.cg_iters, cg_tol=cfg.cg_tol, residual_limit=cfg.cg_residual_limit,
              accept_inexact=cfg.cg_accept_inexact)
    feasible = Batch.from_sets(sets, feasible_only=True)
    batch = feasible if len(feasible) else Batch.from_sets(sets)
    subp = subproblem_for(state, batch)
    triple: ScalarTriple = solve_triple(subp, cfg.cg_iters, cfg.cg_tol)
    idx = classify(subp, triple)
    diag.q, diag.r, diag.s, diag.c, diag.e = triple.q, triple.r, triple.s, idx.c, idx.e
    diag.verdict = idx.verdict.value
    diag.cg_converged = triple.cg_converged

    # pooling feasible sets can still leave the pooled problem infeasible
    recovering = not len(feasible) or idx.verdict is Feasibility.INFEASIBLE
    if recovering:
        diag.branch = "recovery"
        theta_new = recovery_step(state.theta, subp, **cg)
    else:
        dual = solve_dual(subp, triple)
        diag.lam, diag.nu, diag.branch = dual.lambda_star, dual.nu_star, dual.branch
        theta_new = apply_update(state.theta, subp, dual, **cg)
    if cfg.line_search:
        theta_new = _line_search(state, batch, subp, theta_new, recovering)
    diag.post_update_kl = mean_kl(state.nets.policy, theta_new, state.theta, batch.states)
    diag.step_norm = float(np.linalg.norm(theta_new - state.theta))
    return theta_new, recovering


def pcpo_iteration(state: TrainState) -> IterationResult:
    state.iteration += 1
    sets, _ = collect_round(state)
    episodes = [ep for s in sets for ep in s.episodes]

    classified = []
    for s in sets:
        s2, idx = classify_set(state, s)
        log.debug("iter %d learner %d: c=%.4g e=%.4g %s", state.iteration, s.learner_id, idx.c, idx.e, idx.verdict.value)
        classified.append(s2)
    n_feasible = sum(s.feasibility is Feasibility.FEASIBLE for s in classified)

    diag = UpdateDiagnostics(iteration=state.iteration)
    try:
        theta_new, recovered = policy_update(state, classified, diag)
    except (SolverError, UpdateRejected, NumericalError) as e:
        log.warning("iteration %d: policy update failed, parameters unchanged: %s", state.iteration, e)
        diag.branch = "failed"
        return IterationResult(state.iteration, episodes, len(sets), n_feasible, failed=True, diagnostics=diag)

    state.theta = theta_new
    return IterationResult(state.iteration, episodes, len(sets), n_feasible, recovered=recovered,
                           post_update_kl=diag.post_update_kl, diagnostics=diag)
