# pcpolab/train/run.py
from __future__ import annotations
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from pcpolab.envs.base import DoneReason
from pcpolab.envs.export import trajectory_row, write_trajectory
from pcpolab.envs.factory import make_env
from pcpolab.errors import ConfigError, ContractViolation
from pcpolab.nn.checkpoint import load_bundle, save_bundle
from pcpolab.nn.gaussian import clip_action
from pcpolab.nn.mlp import Mlp
from pcpolab.train.config import MANIFEST_NAME, Algo, TrainConfig, write_manifest
from pcpolab.train.loop import TrainState, init_state, pcpo_iteration
from pcpolab.train.metrics import (
    EpochMetrics, EpochTracker, UpdateDiagnostics, write_metrics, write_updates,
)
from pcpolab.train.ppo import ppo_iteration
from pcpolab.utils.io import ensure_dir
from pcpolab.utils.logging import get_logger

log = get_logger(__name__)

METRICS_NAME = "metrics.csv"
UPDATES_NAME = "updates.csv"
SAMPLES_NAME = "samples.csv"


@dataclass
class RunResult:
    metrics: List[EpochMetrics]
    checkpoint: Path
    updates: List[UpdateDiagnostics] = field(default_factory=list)


def checkpoint_dir(out_dir: str | os.PathLike, epoch: int) -> Path:
    return Path(out_dir) / "checkpoints" / f"epoch_{epoch:04d}"


def save_state(state: TrainState, out_dir: str | os.PathLike, epoch: int) -> Path:
    nets = state.nets.as_dict()
    params = state.params()
    return save_bundle(checkpoint_dir(out_dir, epoch), {k: (nets[k], params[k]) for k in nets})


def run(config: TrainConfig, out_dir: str | os.PathLike, overwrite: bool = False) -> RunResult:
    """Train until `config.epochs` epochs of `episodes_per_epoch` episodes have closed.

    Writes manifest.json first, metrics.csv after every epoch, and a parameter
    bundle at epoch 0, every `checkpoint_every` epochs, and at the end. A
    directory that already holds a run is refused unless `overwrite` is set.
    `init_from` is a warm start: parameters are loaded, while optimizer state
    and epoch numbering start afresh.
    """
    if not overwrite and (Path(out_dir) / MANIFEST_NAME).exists():
        raise ConfigError(f"{out_dir} already holds a run; pick a new --out or pass --overwrite")
    out = ensure_dir(out_dir)
    write_manifest(config, out)
    state = init_state(config)
    if config.init_from:
        loaded = load_bundle(config.init_from, state.nets.as_dict())
        state.theta, state.omega, state.phi = loaded["policy"], loaded["value"], loaded["risk"]
        log.info("warm start from %s; optimizer state and epochs restart", config.init_from)
    if config.dump_samples:
        state.samples_path = str(out / SAMPLES_NAME)
        Path(state.samples_path).unlink(missing_ok=True)

    step_fn = ppo_iteration if config.algo is Algo.PPO else pcpo_iteration
    tracker = EpochTracker(config.episodes_per_epoch)
    metrics: List[EpochMetrics] = []
    updates: List[UpdateDiagnostics] = []
    write_metrics(out / METRICS_NAME, metrics)
    last_ckpt = save_state(state, out, 0)

    while len(metrics) < config.epochs:
        res = step_fn(state)
        if res.diagnostics is not None:
            updates.append(res.diagnostics)
        for m in tracker.record(res):
            if len(metrics) >= config.epochs:
                break
            metrics.append(m)
            log.info("epoch %d: return %.3f risk %.3f dev %s feasible %s recoveries %d kl %s",
                     m.epoch, m.mean_return, m.mean_risk,
                     "-" if m.mean_abs_deviation is None else f"{m.mean_abs_deviation:.3f}",
                     "-" if m.feasible_fraction is None else f"{m.feasible_fraction:.2f}",
                     m.recovery_count,
                     "-" if m.mean_post_update_kl is None else f"{m.mean_post_update_kl:.2e}")
            write_metrics(out / METRICS_NAME, metrics)
            if m.epoch % config.checkpoint_every == 0:
                last_ckpt = save_state(state, out, m.epoch)

    if metrics and metrics[-1].epoch % config.checkpoint_every != 0:
        last_ckpt = save_state(state, out, metrics[-1].epoch)
    if config.dump_updates:
        write_updates(out / UPDATES_NAME, updates)
    return RunResult(metrics=metrics, checkpoint=last_ckpt, updates=updates)


def run_cpo(config: TrainConfig, out_dir: str | os.PathLike, overwrite: bool = False) -> RunResult:
    return run(config.model_copy(update={"algo": Algo.CPO, "workers": 1}), out_dir, overwrite)


def run_ppo(config: TrainConfig, out_dir: str | os.PathLike, overwrite: bool = False) -> RunResult:
    if config.algo is not Algo.PPO:
        raise ContractViolation("run_ppo needs algo=ppo")
    return run(config, out_dir, overwrite)


# --------- evaluation ---------
@dataclass
class EvalReport:
    episodes: int
    mean_return: float
    mean_risk: float
    mean_abs_deviation: Optional[float]
    violations: int
    done_reasons: Dict[str, int]


def evaluate_policy(env_name: str, policy: Mlp, theta: np.ndarray, episodes: int, seed: int,
                    dump_dir: Optional[str | os.PathLike] = None) -> EvalReport:
    """Roll out the mean action (no sampling) for `episodes` episodes."""
    if episodes < 1:
        raise ContractViolation("episodes must be >= 1")
    env = make_env(env_name)
    rng = np.random.default_rng(seed)
    returns, risks, devs = [], [], []
    reasons: Dict[str, int] = {}
    if dump_dir is not None:
        ensure_dir(dump_dir)
    for ep in range(episodes):
        obs = env.reset(rng)
        ret = risk = dev = 0.0
        rows = []
        steps = 0
        while True:
            action = clip_action(policy.forward(theta, obs).mu, env.action_low, env.action_high)
            out = env.step(action)
            obs = env.observation()
            steps += 1
            ret += out.reward
            risk += out.risk
            dev += env.deviation()
            rows.append(trajectory_row(env_name, steps, obs, action, out.reward, out.risk))
            if out.done:
                reasons[out.done_reason.value] = reasons.get(out.done_reason.value, 0) + 1
                break
        returns.append(ret)
        risks.append(risk)
        devs.append(dev / steps)
        if dump_dir is not None:
            write_trajectory(Path(dump_dir) / f"episode_{ep:03d}.csv", env_name, rows)

    finite_devs = [x for x in devs if not math.isnan(x)]
    violations = reasons.get(DoneReason.OFF_LANE.value, 0) + reasons.get(DoneReason.COLLISION.value, 0)
    return EvalReport(
        episodes=episodes,
        mean_return=float(np.mean(returns)),
        mean_risk=float(np.mean(risks)),
        mean_abs_deviation=float(np.mean(finite_devs)) if finite_devs else None,
        violations=violations,
        done_reasons=reasons,
    )
