# pcpolab/envs/export.py
from __future__ import annotations
import os
from typing import Dict, List

import pandas as pd

LANE_COLUMNS = ["step", "d", "beta", "delta_f", "reward", "risk"]
INTERSECTION_COLUMNS = ["step", "l1", "v1", "l2", "v2", "l3", "v3", "reward", "risk"]


def trajectory_columns(env_name: str) -> List[str]:
    return LANE_COLUMNS if env_name == "lane" else INTERSECTION_COLUMNS


def trajectory_row(env_name: str, step: int, obs, action, reward: float, risk: float) -> Dict[str, float]:
    """One dump row from the post-step observation and the applied action."""
    if env_name == "lane":
        return {"step": step, "d": obs[0], "beta": obs[1], "delta_f": float(action[0]),
                "reward": reward, "risk": risk}
    row = {"step": step}
    for i in range(3):
        row[f"l{i + 1}"] = obs[2 * i]
        row[f"v{i + 1}"] = obs[2 * i + 1]
    row.update(reward=reward, risk=risk)
    return row


def write_trajectory(path: str | os.PathLike, env_name: str, rows: List[Dict[str, float]]) -> None:
    df = pd.DataFrame(rows, columns=trajectory_columns(env_name))
    df.to_csv(path, index=False)
