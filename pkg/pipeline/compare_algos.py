# pipeline/compare_algos.py
"""Desk-scale comparison of PCPO, CPO and PPO over several seeds.

Trains every (algo, seed) pair into runs/<tag>/<algo>_s<seed>/ and prints one
summary row per run: early/late deviation, risk, off-lane and collision counts.
"""
from __future__ import annotations
import argparse, os
import pandas as pd

from pcpolab.train.config import build_config
from pcpolab.train.run import run


def _window_mean(df: pd.DataFrame, col: str, rows: slice) -> float:
    s = df[col].iloc[rows].dropna()
    return float(s.mean()) if len(s) else float("nan")


def summarize(df: pd.DataFrame, d: float, settle: int = 20, head: int = 10, tail: int = 20) -> dict:
    late = df.iloc[settle:]
    return dict(
        epochs=len(df),
        dev_first=round(_window_mean(df, "mean_abs_deviation", slice(0, head)), 4),
        dev_last=round(_window_mean(df, "mean_abs_deviation", slice(-tail, None)), 4),
        ret_first=round(_window_mean(df, "mean_return", slice(0, 100)), 3),
        ret_last=round(_window_mean(df, "mean_return", slice(-100, None)), 3),
        risk_ok_frac=round(float((late["mean_risk"] <= d).mean()) if len(late) else float("nan"), 3),
        offlane=int(df["offlane_count"].sum()),
        collisions=int(df["collision_count"].sum()),
        mean_kl=round(_window_mean(df, "mean_post_update_kl", slice(0, None)), 6),
    )


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=None, help="base config (conf/lane.yaml, ...)")
    ap.add_argument("--algos", nargs="+", default=["pcpo", "cpo", "ppo"])
    ap.add_argument("--seeds", nargs="+", type=int, default=[0, 1, 2, 3, 4])
    ap.add_argument("--epochs", type=int, default=None)
    ap.add_argument("--tag", default="compare")
    ap.add_argument("--out-csv", default=None)
    ap.add_argument("--overwrite", action="store_true", help="rerun into existing run directories")
    args = ap.parse_args()

    rows = []
    for algo in args.algos:
        for seed in args.seeds:
            cfg = build_config(args.config, algo=algo, seed=seed, epochs=args.epochs)
            out_dir = os.path.join("runs", args.tag, f"{algo}_s{seed}")
            print(f"[compare] {algo} seed={seed} env={cfg.env} → {out_dir}")
            res = run(cfg, out_dir, overwrite=args.overwrite)
            df = pd.read_csv(os.path.join(out_dir, "metrics.csv"))
            rows.append(dict(algo=algo, seed=seed, **summarize(df, cfg.d), checkpoint=str(res.checkpoint)))

    table = pd.DataFrame(rows)
    print(table.to_string(index=False))
    print()
    print(table.groupby("algo")[["dev_last", "ret_last", "risk_ok_frac", "offlane", "collisions"]].mean().to_string())
    if args.out_csv:
        os.makedirs(os.path.dirname(args.out_csv) or ".", exist_ok=True)
        table.to_csv(args.out_csv, index=False)
        print(f"\n[compare] wrote → {args.out_csv}")


if __name__ == "__main__":
    main()
