from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from pcpolab.envs.base import DoneReason
from pcpolab.errors import ConfigError, ContractViolation
from pcpolab.nn.gaussian import log_prob
from pcpolab.nn.mlp import LinearHead, Mlp, MlpSpec
from pcpolab.nn.optim import Sgd
from pcpolab.rollout.collect import Batch, EpisodeRecord, Feasibility
from pcpolab.rollout.targets import q_input
from pcpolab.train.config import Algo, TrainConfig, build_config, read_manifest
from pcpolab.train.loop import (
    _fit, collect_round, init_state, pcpo_iteration, policy_update, subproblem_for, update_critics,
)
from pcpolab.train.metrics import (
    EpochTracker, IterationResult, UpdateDiagnostics, aggregate_runs, metrics_frame,
)
from pcpolab.train.ppo import clipped_surrogate, clipped_surrogate_grad
from pcpolab.train.run import evaluate_policy, run
from pcpolab.solver.subproblem import weighted_score_gradient


def _config(**kw):
    base = dict(env="intersection", workers=2, n_steps=16, episodes_per_epoch=2, epochs=1,
                hidden=(8,), cg_iters=100, seed=3)
    base.update(kw)
    return TrainConfig(**base)


# --------- config ---------
def test_risk_limit_follows_the_environment():
    assert TrainConfig(env="lane").d == 1.0
    assert TrainConfig(env="intersection").d == 5.0
    assert TrainConfig(env="lane", d=2.5).d == 2.5


def test_cpo_runs_one_learner():
    assert TrainConfig(algo="cpo").workers == 1
    assert TrainConfig(algo="cpo", workers=4).workers == 1


def test_build_config_layers(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("env: intersection\nepochs: 7\nseed: 1\n")
    cfg = build_config(path, seed=9, epochs=None)
    assert (cfg.env, cfg.epochs, cfg.seed) == ("intersection", 7, 9)
    with pytest.raises(ConfigError):
        build_config(tmp_path / "missing.yaml")
    (tmp_path / "bad.yaml").write_text("no_such_knob: 1\n")
    with pytest.raises(ConfigError):
        build_config(tmp_path / "bad.yaml")


# --------- critics ---------
def test_perfect_critic_is_left_alone():
    state = init_state(_config())
    sets, _ = collect_round(state)
    nets = state.nets
    sets = [replace(s,
                    reward_targets=nets.value.value(state.omega, q_input(s.states, s.actions)),
                    risk_targets=nets.risk.value(state.phi, q_input(s.states, s.actions)))
            for s in sets]
    omega, phi = update_critics(Batch.from_sets(sets), nets, state.omega, state.phi,
                                Sgd(0.1), Sgd(0.1), passes=3)
    assert np.array_equal(omega, state.omega)
    assert np.array_equal(phi, state.phi)


def test_single_sample_critic_step_on_linear_net():
    net = Mlp(MlpSpec(2, (), LinearHead()))
    w = np.array([0.5, -1.0, 0.25])          # two weights then the bias
    x = np.array([[2.0, 1.0]])
    target = np.array([3.0])
    err = 0.5 * 2.0 - 1.0 * 1.0 + 0.25 - 3.0
    out = _fit(net, w, x, target, Sgd(0.1), passes=1, name="value")
    assert np.allclose(out, w - 0.1 * err * np.array([2.0, 1.0, 1.0]))


@pytest.mark.parametrize("env", ["lane", "intersection"])
def test_critic_loss_decreases_on_a_frozen_batch(env):
    state = init_state(TrainConfig(env=env, seed=0))
    _, batch = collect_round(state)
    x = q_input(batch.states, batch.actions)
    fits = ((state.nets.value, state.omega, batch.reward_targets),
            (state.nets.risk, state.phi, batch.risk_targets))
    for net, params, targets in fits:
        opt = Sgd(1e-3)
        losses = []
        for _ in range(100):
            err = net.value(params, x) - targets
            losses.append(0.5 * float(np.mean(err * err)))
            params = _fit(net, params, x, targets, opt, passes=1, name="critic")
        assert all(later < earlier for earlier, later in zip(losses, losses[1:]))


# --------- policy update ---------
def test_all_infeasible_takes_recovery_step():
    state = init_state(_config())
    sets, _ = collect_round(state)
    sets = [replace(s, feasibility=Feasibility.INFEASIBLE) for s in sets]
    diag = UpdateDiagnostics(iteration=1)
    theta, recovered = policy_update(state, sets, diag)
    assert recovered and diag.branch == "recovery"
    assert not np.array_equal(theta, state.theta)


def test_slack_constraint_takes_one_pooled_update():
    state = init_state(_config(d=1e6))
    sets, _ = collect_round(state)
    sets = [replace(s, feasibility=Feasibility.FEASIBLE) for s in sets]
    diag = UpdateDiagnostics(iteration=1)
    theta, recovered = policy_update(state, sets, diag)
    assert not recovered
    assert diag.branch == "trust_region" and diag.nu == 0.0
    # the quadratic model sits on the trust-region edge; the true KL may overshoot it
    subp = subproblem_for(state, Batch.from_sets(sets, feasible_only=True))
    step = theta - state.theta
    assert 0.5 * step @ subp.hvp(step) == pytest.approx(state.config.delta, rel=1e-3)
    assert diag.post_update_kl > 0


def test_line_search_keeps_true_kl_inside_trust_region():
    state = init_state(_config(d=1e6, line_search=True))
    sets, _ = collect_round(state)
    sets = [replace(s, feasibility=Feasibility.FEASIBLE) for s in sets]
    diag = UpdateDiagnostics(iteration=1)
    theta, _ = policy_update(state, sets, diag)
    assert not np.array_equal(theta, state.theta)
    assert 0 < diag.post_update_kl <= state.config.delta


def test_default_intersection_updates_rarely_fail():
    state = init_state(TrainConfig(env="intersection", seed=0))
    before = state.theta.copy()
    results = [pcpo_iteration(state) for _ in range(12)]
    assert sum(r.failed for r in results) < 0.1 * len(results)
    assert not np.array_equal(state.theta, before)


def test_iteration_counts_sets_and_updates_theta():
    state = init_state(_config())
    before = state.theta.copy()
    res = pcpo_iteration(state)
    assert res.n_sets == 2 and 0 <= res.n_feasible <= 2
    assert res.failed or not np.array_equal(state.theta, before)


def test_single_learner_pcpo_equals_cpo():
    a = init_state(_config(workers=1))
    b = init_state(_config(algo="cpo"))
    assert np.array_equal(a.theta, b.theta)
    for _ in range(3):
        pcpo_iteration(a)
        pcpo_iteration(b)
    assert np.array_equal(a.theta, b.theta)


# --------- PPO ---------
def test_zero_clip_gradient_is_plain_surrogate_gradient():
    state = init_state(_config(algo="ppo"))
    _, batch = collect_round(state)
    adv = np.random.default_rng(0).normal(size=len(batch))
    pol, theta = state.nets.policy, state.theta
    g = clipped_surrogate_grad(pol, theta, batch.states, batch.actions, batch.log_probs, adv, 0.0)
    assert np.allclose(g, weighted_score_gradient(pol, theta, batch.states, batch.actions, adv))


def test_inactive_clip_matches_unclipped_objective():
    ratio = np.array([0.95, 1.0, 1.1])
    adv = np.array([1.0, -2.0, 0.5])
    assert clipped_surrogate(ratio, adv, 0.2) == pytest.approx(np.mean(ratio * adv))
    assert clipped_surrogate(np.array([2.0]), np.array([1.0]), 0.2) == pytest.approx(1.2)


def test_clip_drops_only_samples_pushed_past_the_bound():
    state = init_state(_config(algo="ppo"))
    _, batch = collect_round(state)
    pol, theta = state.nets.policy, state.theta
    logp = log_prob(pol.forward(theta, batch.states), batch.actions)
    adv = np.where(np.arange(len(batch)) % 2 == 0, 1.0, -1.0)
    # ratio 1.5 everywhere: the clip binds where A > 0 and is inactive where A < 0
    g = clipped_surrogate_grad(pol, theta, batch.states, batch.actions, logp - np.log(1.5), adv, 0.2)
    expected = weighted_score_gradient(pol, theta, batch.states, batch.actions, np.where(adv < 0, 1.5 * adv, 0.0))
    assert np.allclose(g, expected)


# --------- epochs & runs ---------
def _episode(ret=1.0, risk=0.0, dev=0.1, reason=DoneReason.TIMEOUT):
    return EpisodeRecord(learner_id=0, ret=ret, risk=risk, mean_abs_deviation=dev, steps=10, done_reason=reason)


def test_epoch_tracker_rolls_surplus_episodes_over():
    tr = EpochTracker(2)
    assert tr.record(IterationResult(1, [_episode()], 2, 2)) == []
    closed = tr.record(IterationResult(2, [_episode(3.0, 50.0, reason=DoneReason.COLLISION), _episode()], 2, 1,
                                       recovered=True))
    assert len(closed) == 1
    m = closed[0]
    assert (m.epoch, m.episodes, m.iterations) == (1, 2, 2)
    assert m.mean_return == pytest.approx(2.0) and m.mean_risk == pytest.approx(25.0)
    assert m.feasible_fraction == pytest.approx(0.75)
    assert m.recovery_count == 1 and m.collision_count == 1
    m2 = tr.record(IterationResult(3, [_episode()], 2, None))[0]
    assert m2.epoch == 2 and m2.feasible_fraction is None


def test_aggregate_single_run_has_zero_spread():
    tr = EpochTracker(1)
    ms = [tr.record(IterationResult(i, [_episode(float(i))], 1, 1))[0] for i in range(1, 4)]
    out = aggregate_runs([metrics_frame(ms)])
    assert list(out["mean_return"].columns) == ["epoch", "mean", "std", "min", "max"]
    assert np.all(out["mean_return"]["std"] == 0)


def test_zero_epochs_writes_initial_checkpoint_only(tmp_path):
    res = run(_config(epochs=0), tmp_path / "run")
    assert res.metrics == []
    assert (tmp_path / "run" / "manifest.json").is_file()
    assert len(pd.read_csv(tmp_path / "run" / "metrics.csv")) == 0
    ckpts = sorted(p.name for p in (tmp_path / "run" / "checkpoints").iterdir())
    assert ckpts == ["epoch_0000"]
    assert read_manifest(tmp_path / "run").config.epochs == 0


def test_rerun_into_a_used_directory_needs_overwrite(tmp_path):
    run(_config(epochs=0), tmp_path / "run")
    with pytest.raises(ConfigError):
        run(_config(epochs=0), tmp_path / "run")
    res = run(_config(epochs=0), tmp_path / "run", overwrite=True)
    assert res.checkpoint.is_dir()


def test_same_seed_same_metrics(tmp_path):
    cfg = _config(epochs=2)
    run(cfg, tmp_path / "a")
    run(cfg, tmp_path / "b")
    a = pd.read_csv(tmp_path / "a" / "metrics.csv")
    b = pd.read_csv(tmp_path / "b" / "metrics.csv")
    assert len(a) == 2
    pd.testing.assert_frame_equal(a, b)
    ckpt = "checkpoints/epoch_0002/policy.ckpt"
    assert (tmp_path / "a" / ckpt).read_bytes() == (tmp_path / "b" / ckpt).read_bytes()


def test_ppo_run_leaves_feasibility_blank(tmp_path):
    res = run(_config(algo="ppo", epochs=1), tmp_path / "ppo")
    assert len(res.metrics) == 1
    assert res.metrics[0].feasible_fraction is None


def test_evaluate_fresh_policy():
    state = init_state(_config(env="lane", workers=1))
    a = evaluate_policy("lane", state.nets.policy, state.theta, episodes=2, seed=4)
    b = evaluate_policy("lane", state.nets.policy, state.theta, episodes=2, seed=4)
    assert a == b
    assert a.mean_abs_deviation > 0
    assert np.isfinite(a.mean_return)
    with pytest.raises(ContractViolation):
        evaluate_policy("lane", state.nets.policy, state.theta, episodes=0, seed=4)


def test_algo_enum_values():
    assert [a.value for a in Algo] == ["pcpo", "cpo", "ppo"]
