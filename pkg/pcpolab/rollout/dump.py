# pcpolab/rollout/dump.py
"""Raw per-iteration sample dump.

One CSV row per transition: learner_id, iteration, t, s0..s{k}, a0..a{m},
log_prob_old, r, r_tilde, done, R, R_tilde (targets blank if not computed).
"""
from __future__ import annotations
import os
from typing import Sequence

import pandas as pd

from pcpolab.rollout.collect import SampleSet


def samples_frame(sets: Sequence[SampleSet]) -> pd.DataFrame:
    rows = []
    for ss in sets:
        for t, tr in enumerate(ss.transitions):
            row = {"learner_id": ss.learner_id, "iteration": ss.iteration, "t": t}
            row.update({f"s{i}": v for i, v in enumerate(tr.s)})
            row.update({f"a{i}": v for i, v in enumerate(tr.a)})
            row.update(log_prob_old=tr.log_prob_old, r=tr.r, r_tilde=tr.r_tilde, done=int(tr.done))
            row["R"] = ss.reward_targets[t] if ss.reward_targets is not None else None
            row["R_tilde"] = ss.risk_targets[t] if ss.risk_targets is not None else None
            rows.append(row)
    return pd.DataFrame(rows)


def append_samples(path: str | os.PathLike, sets: Sequence[SampleSet]) -> None:
    df = samples_frame(sets)
    df.to_csv(path, mode="a", header=not os.path.exists(path), index=False)
