# pcpolab/cli.py
"""Command line: train, eval, plot-data.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Log verbosity comes from PCPO_LOG={error|warn|info|debug}.
"""
from __future__ import annotations
from enum import Enum
from pathlib import Path
from typing import List, Optional

import pandas as pd
import typer

from pcpolab.envs.factory import make_env
from pcpolab.errors import CheckpointError, ConfigError, PcpoError
from pcpolab.nn.checkpoint import latest_checkpoint, load_bundle
from pcpolab.train.config import Algo, build_config, read_manifest
from pcpolab.train.loop import build_networks
from pcpolab.train.metrics import aggregate_runs
from pcpolab.train.run import evaluate_policy, run
from pcpolab.utils.io import ensure_dir
from pcpolab.utils.logging import configure, get_logger

log = get_logger(__name__)

app = typer.Typer(add_completion=False, help="Parallel constrained policy optimization lab.")


class EnvChoice(str, Enum):
    lane = "lane"
    intersection = "intersection"


def _fail(msg: str, code: int) -> typer.Exit:
    typer.echo(f"error: {msg}", err=True)
    return typer.Exit(code)


@app.callback()
def _main() -> None:
    configure()


@app.command()
def train(
    out: Path = typer.Option(..., "--out", help="run directory"),
    config: Optional[Path] = typer.Option(None, "--config", help="JSON/YAML config or a run manifest"),
    seed: Optional[int] = typer.Option(None, "--seed", min=0),
    env: Optional[EnvChoice] = typer.Option(None, "--env"),
    algo: Optional[Algo] = typer.Option(None, "--algo"),
    workers: Optional[int] = typer.Option(None, "--workers"),
    epochs: Optional[int] = typer.Option(None, "--epochs"),
    overwrite: bool = typer.Option(False, "--overwrite", help="replace a run already in --out"),
) -> None:
    """Train a policy; writes manifest.json, metrics.csv and checkpoints under --out.

    --out must not hold a previous run unless --overwrite is given.
    """
    try:
        cfg = build_config(
            config, seed=seed, env=env.value if env else None,
            algo=algo.value if algo else None, workers=workers, epochs=epochs,
        )
    except ConfigError as e:
        raise _fail(str(e), 2)
    try:
        result = run(cfg, out, overwrite=overwrite)
    except ConfigError as e:
        raise _fail(str(e), 2)
    except (PcpoError, OSError) as e:
        raise _fail(str(e), 1)
    typer.echo(f"[train] {len(result.metrics)} epochs → {out / 'metrics.csv'}")
    typer.echo(f"[train] checkpoint → {result.checkpoint}")


@app.command("eval")
def evaluate(
    run_dir: Optional[Path] = typer.Option(None, "--run", help="run directory (manifest + checkpoints)"),
    checkpoint: Optional[Path] = typer.Option(None, "--checkpoint", help="checkpoint directory"),
    env: Optional[EnvChoice] = typer.Option(None, "--env"),
    hidden: str = typer.Option("100,100", "--hidden", help="hidden widths when no manifest is given"),
    episodes: int = typer.Option(10, "--episodes", min=1),
    seed: int = typer.Option(0, "--seed", min=0),
    dump: Optional[Path] = typer.Option(None, "--dump",
                                        help="trajectory CSV directory; no trajectories are written without it"),
) -> None:
    """Roll out the deterministic (mean-action) policy and report return, risk and violations.

    Trajectory CSVs are opt-in: they are written only when --dump is given.
    """
    try:
        if run_dir is not None:
            manifest = read_manifest(run_dir)
            env_name = env.value if env else manifest.config.env
            widths = manifest.config.hidden
            ckpt = checkpoint or latest_checkpoint(run_dir)
        elif checkpoint is not None and env is not None:
            env_name = env.value
            widths = tuple(int(w) for w in hidden.split(",") if w.strip())
            ckpt = checkpoint
        else:
            raise ConfigError("give --run DIR, or --checkpoint DIR with --env")
        env0 = make_env(env_name)
        nets = build_networks(env0.obs_dim, env0.action_low, env0.action_high, widths)
        theta = load_bundle(ckpt, {"policy": nets.policy})["policy"]
    except (ConfigError, CheckpointError, ValueError) as e:
        raise _fail(str(e), 2)

    try:
        report = evaluate_policy(env_name, nets.policy, theta, episodes, seed, dump)
    except (PcpoError, OSError) as e:
        raise _fail(str(e), 1)
    dev = "-" if report.mean_abs_deviation is None else f"{report.mean_abs_deviation:.4f}"
    typer.echo(f"episodes={report.episodes} mean_return={report.mean_return:.4f} "
               f"mean_risk={report.mean_risk:.4f} violations={report.violations} mean_abs_deviation={dev}")
    for reason, count in sorted(report.done_reasons.items()):
        typer.echo(f"  {reason}: {count}")


@app.command("plot-data")
def plot_data(
    metrics: List[Path] = typer.Argument(None, help="metrics.csv files, one per run"),
    out: Path = typer.Option(..., "--out", help="output directory"),
) -> None:
    """Merge runs by epoch into one CSV per metric (epoch, mean, std, min, max)."""
    if not metrics:
        raise _fail("no metrics files given", 2)
    try:
        frames = [pd.read_csv(p) for p in metrics]
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise _fail(str(e), 2)
    lengths = {len(f) for f in frames}
    if len(lengths) > 1:
        log.warning("runs have %s epochs; truncating to %d", sorted(lengths), min(lengths))
    out_dir = ensure_dir(out)
    for name, df in aggregate_runs(frames).items():
        df.to_csv(out_dir / f"{name}.csv", index=False)
    typer.echo(f"[plot-data] {len(frames)} runs → {out_dir}")


def main() -> None:
    app()


if __name__ == "__main__":
    main()
