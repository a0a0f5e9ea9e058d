# pcpolab/rollout/collect.py
"""Synchronized sample collection.

K workers each own one environment and one rng stream (master_seed +
learner_id). A collection round steps every worker `n_steps` times under the
same read-only policy parameters and returns only when all of them are done,
so rounds and update phases strictly alternate.
"""
from __future__ import annotations
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from pcpolab.envs.base import DoneReason, Env
from pcpolab.errors import ContractViolation, RolloutError
from pcpolab.nn.gaussian import clip_action, log_prob, sample
from pcpolab.nn.mlp import Mlp


class Feasibility(str, Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    UNEVALUATED = "Unevaluated"


@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: np.ndarray           # sampled action, before clipping to the env bounds
    log_prob_old: float
    r: float
    r_tilde: float
    s_next: np.ndarray
    a_next: np.ndarray      # sampled at collection time for the bootstrap term
    done: bool


@dataclass(frozen=True)
class EpisodeRecord:
    learner_id: int
    ret: float
    risk: float
    mean_abs_deviation: float
    steps: int
    done_reason: DoneReason


@dataclass(frozen=True)
class SampleSet:
    learner_id: int
    iteration: int
    transitions: Tuple[Transition, ...]
    reward_targets: Optional[np.ndarray] = None
    risk_targets: Optional[np.ndarray] = None
    feasibility: Feasibility = Feasibility.UNEVALUATED
    episodes: Tuple[EpisodeRecord, ...] = ()

    def __len__(self) -> int:
        return len(self.transitions)

    @property
    def states(self) -> np.ndarray:
        return np.array([t.s for t in self.transitions])

    @property
    def actions(self) -> np.ndarray:
        return np.array([t.a for t in self.transitions])

    @property
    def log_probs(self) -> np.ndarray:
        return np.array([t.log_prob_old for t in self.transitions])

    @property
    def rewards(self) -> np.ndarray:
        return np.array([t.r for t in self.transitions])

    @property
    def risks(self) -> np.ndarray:
        return np.array([t.r_tilde for t in self.transitions])

    @property
    def dones(self) -> np.ndarray:
        return np.array([t.done for t in self.transitions], dtype=bool)

    @property
    def segment_starts(self) -> np.ndarray:
        """First transition of the set and every transition that follows a reset."""
        d = self.dones
        return np.concatenate([[True], d[:-1]]) if len(d) else d


@dataclass(frozen=True)
class Batch:
    """Concatenation of sample sets, in learner order."""
    sets: Tuple[SampleSet, ...]

    @classmethod
    def from_sets(cls, sets: Sequence[SampleSet], feasible_only: bool = False) -> "Batch":
        chosen = [s for s in sets if not feasible_only or s.feasibility is Feasibility.FEASIBLE]
        return cls(tuple(chosen))

    def __len__(self) -> int:
        return sum(len(s) for s in self.sets)

    def require_nonempty(self) -> "Batch":
        if len(self) == 0:
            raise ContractViolation("empty batch")
        return self

    def _cat(self, attr: str) -> np.ndarray:
        return np.concatenate([getattr(s, attr) for s in self.sets])

    @property
    def states(self) -> np.ndarray:
        return self._cat("states")

    @property
    def actions(self) -> np.ndarray:
        return self._cat("actions")

    @property
    def log_probs(self) -> np.ndarray:
        return self._cat("log_probs")

    @property
    def reward_targets(self) -> np.ndarray:
        return self._cat("reward_targets")

    @property
    def risk_targets(self) -> np.ndarray:
        return self._cat("risk_targets")

    @property
    def segment_starts(self) -> np.ndarray:
        return self._cat("segment_starts")


class RolloutWorker:
    """One learner: an environment, an rng stream, and the running episode."""

    def __init__(self, learner_id: int, env: Env, rng: np.random.Generator):
        self.learner_id = learner_id
        self.env = env
        self.rng = rng
        self.obs: Optional[np.ndarray] = None
        self._ep_return = self._ep_risk = self._ep_dev = 0.0
        self._ep_steps = 0

    def _start_episode(self) -> None:
        self.obs = self.env.reset(self.rng)
        self._ep_return = self._ep_risk = self._ep_dev = 0.0
        self._ep_steps = 0

    def run(self, policy: Mlp, params: np.ndarray, n_steps: int, iteration: int) -> SampleSet:
        if self.obs is None:
            self._start_episode()
        low, high = self.env.action_low, self.env.action_high
        transitions: List[Transition] = []
        episodes: List[EpisodeRecord] = []

        dist = policy.forward(params, self.obs)
        a = sample(dist, self.rng)
        for _ in range(n_steps):
            lp = log_prob(dist, a)
            out = self.env.step(clip_action(a, low, high))
            s_next = self.env.observation()
            self._ep_return += out.reward
            self._ep_risk += out.risk
            self._ep_dev += self.env.deviation()
            self._ep_steps += 1

            dist_next = policy.forward(params, s_next)
            a_next = sample(dist_next, self.rng)
            transitions.append(Transition(self.obs, a, lp, out.reward, out.risk, s_next, a_next, out.done))

            if out.done:
                episodes.append(EpisodeRecord(
                    learner_id=self.learner_id,
                    ret=self._ep_return,
                    risk=self._ep_risk,
                    mean_abs_deviation=self._ep_dev / self._ep_steps,
                    steps=self._ep_steps,
                    done_reason=out.done_reason,
                ))
                self._start_episode()
                dist = policy.forward(params, self.obs)
                a = sample(dist, self.rng)
            else:
                self.obs, dist, a = s_next, dist_next, a_next
        return SampleSet(self.learner_id, iteration, tuple(transitions), episodes=tuple(episodes))


def make_workers(envs: Sequence[Env], master_seed: int) -> List[RolloutWorker]:
    return [RolloutWorker(i, env, np.random.default_rng(master_seed + i)) for i, env in enumerate(envs)]


def collect(policy: Mlp, params: np.ndarray, workers: Sequence[RolloutWorker], n_steps: int,
            iteration: int, parallel: bool = True) -> List[SampleSet]:
    """One barrier-synchronized round: K sample sets, ordered by learner_id."""
    if n_steps < 1:
        raise ContractViolation("n_steps must be >= 1")
    params = np.asarray(params).view()
    params.setflags(write=False)

    def one(w: RolloutWorker) -> SampleSet:
        try:
            return w.run(policy, params, n_steps, iteration)
        except Exception as e:
            raise RolloutError(w.learner_id, e) from e

    if parallel and len(workers) > 1:
        with ThreadPoolExecutor(max_workers=len(workers), thread_name_prefix="learner") as ex:
            return list(ex.map(one, workers))
    return [one(w) for w in workers]
