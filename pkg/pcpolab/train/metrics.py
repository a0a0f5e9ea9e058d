# pcpolab/train/metrics.py
from __future__ import annotations
import math
import os
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import pandas as pd
from pydantic import BaseModel, Field

from pcpolab.envs.base import DoneReason
from pcpolab.rollout.collect import EpisodeRecord


class EpochMetrics(BaseModel):
    epoch: int
    episodes: int
    iterations: int
    mean_return: float
    mean_risk: float = Field(ge=0)
    mean_abs_deviation: Optional[float] = None
    feasible_fraction: Optional[float] = Field(None, ge=0, le=1)
    recovery_count: int = 0
    failed_updates: int = 0
    mean_post_update_kl: Optional[float] = None
    collision_count: int = 0
    offlane_count: int = 0


METRIC_COLUMNS = list(EpochMetrics.model_fields)


@dataclass
class UpdateDiagnostics:
    iteration: int
    q: float = math.nan
    r: float = math.nan
    s: float = math.nan
    c: float = math.nan
    e: float = math.nan
    verdict: str = ""
    lam: float = math.nan
    nu: float = math.nan
    step_norm: float = 0.0
    post_update_kl: float = math.nan
    branch: str = ""
    cg_converged: bool = True

    def to_row(self) -> dict:
        row = asdict(self)
        row["lambda"] = row.pop("lam")
        return row


@dataclass
class IterationResult:
    iteration: int
    episodes: List[EpisodeRecord]
    n_sets: int
    n_feasible: Optional[int]          # None when sets are not classified (PPO)
    recovered: bool = False
    failed: bool = False
    post_update_kl: Optional[float] = None
    diagnostics: Optional[UpdateDiagnostics] = None


@dataclass
class _Window:
    iterations: int = 0
    sets: int = 0
    feasible: int = 0
    evaluated: bool = False
    recoveries: int = 0
    failures: int = 0
    kls: List[float] = field(default_factory=list)
    episodes: List[EpisodeRecord] = field(default_factory=list)


class EpochTracker:
    """Closes an epoch every `episodes_per_epoch` completed episodes.

    Iteration statistics go to the epoch open when the iteration ran;
    surplus episodes roll over into the next epoch.
    """

    def __init__(self, episodes_per_epoch: int, start_epoch: int = 1):
        self.episodes_per_epoch = episodes_per_epoch
        self.next_epoch = start_epoch
        self._w = _Window()

    def record(self, res: IterationResult) -> List[EpochMetrics]:
        w = self._w
        w.iterations += 1
        w.sets += res.n_sets
        if res.n_feasible is not None:
            w.evaluated = True
            w.feasible += res.n_feasible
        w.recoveries += int(res.recovered)
        w.failures += int(res.failed)
        if res.post_update_kl is not None:
            w.kls.append(res.post_update_kl)

        closed = []
        for ep in res.episodes:
            self._w.episodes.append(ep)
            if len(self._w.episodes) == self.episodes_per_epoch:
                closed.append(self._close())
        return closed

    def _close(self) -> EpochMetrics:
        w = self._w
        eps = w.episodes
        devs = [e.mean_abs_deviation for e in eps if not math.isnan(e.mean_abs_deviation)]
        m = EpochMetrics(
            epoch=self.next_epoch,
            episodes=len(eps),
            iterations=w.iterations,
            mean_return=sum(e.ret for e in eps) / len(eps),
            mean_risk=sum(e.risk for e in eps) / len(eps),
            mean_abs_deviation=(sum(devs) / len(devs)) if devs else None,
            feasible_fraction=(w.feasible / w.sets) if (w.evaluated and w.sets) else None,
            recovery_count=w.recoveries,
            failed_updates=w.failures,
            mean_post_update_kl=(sum(w.kls) / len(w.kls)) if w.kls else None,
            collision_count=sum(e.done_reason is DoneReason.COLLISION for e in eps),
            offlane_count=sum(e.done_reason is DoneReason.OFF_LANE for e in eps),
        )
        self.next_epoch += 1
        self._w = _Window()
        return m


def metrics_frame(metrics: Sequence[EpochMetrics]) -> pd.DataFrame:
    return pd.DataFrame([m.model_dump() for m in metrics], columns=METRIC_COLUMNS)


def write_metrics(path: str | os.PathLike, metrics: Sequence[EpochMetrics]) -> None:
    metrics_frame(metrics).to_csv(path, index=False)


def write_updates(path: str | os.PathLike, rows: Sequence[UpdateDiagnostics]) -> None:
    cols = list(UpdateDiagnostics(iteration=0).to_row())
    pd.DataFrame([r.to_row() for r in rows], columns=cols).to_csv(path, index=False)


def aggregate_runs(frames: Sequence[pd.DataFrame]) -> dict:
    """Per metric: epoch, mean, std, min, max across runs.

    Runs of unequal length are cut to the shortest. std is the population
    deviation, so a single run yields zeros.
    """
    shortest = min(len(f) for f in frames)
    merged = pd.concat([f.iloc[:shortest].assign(run=i) for i, f in enumerate(frames)], ignore_index=True)
    out = {}
    for col in merged.columns:
        if col in ("epoch", "run") or not pd.api.types.is_numeric_dtype(merged[col]):
            continue
        g = merged.groupby("epoch")[col]
        out[col] = pd.DataFrame({
            "mean": g.mean(),
            "std": g.std(ddof=0),
            "min": g.min(),
            "max": g.max(),
        }).reset_index()
    return out
