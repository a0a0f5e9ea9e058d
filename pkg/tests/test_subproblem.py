import numpy as np
import pytest

from pcpolab.envs.factory import make_envs
from pcpolab.errors import ContractViolation
from pcpolab.nn.gaussian import log_prob
from pcpolab.rollout.collect import Batch, Feasibility, collect, make_workers
from pcpolab.rollout.targets import compute_targets
from pcpolab.solver.subproblem import (
    ScalarTriple, Subproblem, build_subproblem, classify, solve_triple, weighted_score_gradient,
)
from pcpolab.train.loop import build_networks


def _batch(seed=0):
    env = make_envs("lane", 1)[0]
    nets = build_networks(env.obs_dim, env.action_low, env.action_high, (8,))
    rng = np.random.default_rng(seed)
    theta, omega, phi = (net.init_params(rng) for net in (nets.policy, nets.value, nets.risk))
    sets = collect(nets.policy, theta, make_workers(make_envs("lane", 2), seed), 12, 1)
    sets = [compute_targets(s, nets.value, omega, nets.risk, phi, 0.95) for s in sets]
    return nets, theta, Batch.from_sets(sets)


def _subp(c, delta=0.1, n=3):
    return Subproblem(g=np.ones(n), b=np.ones(n), c=c, delta=delta, hvp=lambda v: v)


def test_score_gradient_matches_finite_differences():
    nets, theta, batch = _batch()
    states, actions = batch.states, batch.actions
    w = np.random.default_rng(3).normal(size=len(states))
    grad = weighted_score_gradient(nets.policy, theta, states, actions, w)

    def surrogate(p):
        return float(np.mean(w * log_prob(nets.policy.forward(p, states), actions)))

    eps = 1e-6
    fd = np.array([(surrogate(theta + eps * e) - surrogate(theta - eps * e)) / (2 * eps)
                   for e in np.eye(len(theta))])
    assert np.allclose(grad, fd, rtol=1e-4, atol=1e-7)


def test_zero_weights_give_zero_gradient():
    nets, theta, batch = _batch()
    n = len(batch)
    subp = build_subproblem(batch, nets.policy, theta, np.zeros(n), np.zeros(n), d=1.0, delta=1e-3)
    assert np.all(subp.g == 0) and np.all(subp.b == 0)


def test_risk_margin_at_the_limit_is_zero():
    nets, theta, batch = _batch()
    n = len(batch)
    d = float(np.mean(batch.risk_targets[batch.segment_starts]))
    subp = build_subproblem(batch, nets.policy, theta, np.ones(n), np.ones(n), d=d, delta=1e-3)
    assert subp.c == 0.0
    assert build_subproblem(batch, nets.policy, theta, np.ones(n), np.ones(n), d=d - 1, delta=1e-3).c \
        == pytest.approx(1.0)


def test_empty_batch_rejected():
    nets, theta, _ = _batch()
    with pytest.raises(ContractViolation):
        build_subproblem(Batch(()), nets.policy, theta, np.zeros(0), np.zeros(0), d=1.0, delta=1e-3)


def test_bad_subproblem_inputs_rejected():
    with pytest.raises(ContractViolation):
        _subp(0.0, delta=0.0)
    with pytest.raises(ContractViolation):
        Subproblem(g=np.array([np.nan]), b=np.zeros(1), c=0.0, delta=0.1, hvp=lambda v: v)


def test_triple_from_identity_metric():
    subp = Subproblem(g=np.array([1.0, 2.0]), b=np.array([0.0, 3.0]), c=0.0, delta=0.1, hvp=lambda v: v)
    t = solve_triple(subp)
    assert (t.q, t.r, t.s) == pytest.approx((5.0, 6.0, 9.0))


def test_classification_cases():
    triple = ScalarTriple(q=1.0, r=0.0, s=1.0)
    assert classify(_subp(-1.0), triple).verdict is Feasibility.FEASIBLE
    assert classify(_subp(0.0), triple).verdict is Feasibility.FEASIBLE
    assert classify(_subp(0.2, delta=0.1), triple).verdict is Feasibility.FEASIBLE
    idx = classify(_subp(0.5, delta=0.1), triple)
    assert idx.verdict is Feasibility.INFEASIBLE
    assert idx.e == pytest.approx(0.1 - 0.25)


def test_vanishing_risk_gradient_counts_as_feasible():
    idx = classify(_subp(5.0, delta=0.1), ScalarTriple(q=1.0, r=0.0, s=0.0))
    assert idx.verdict is Feasibility.FEASIBLE
    assert not idx.constraint_active
    assert idx.e == 0.1


def test_larger_trust_region_never_makes_a_set_infeasible():
    rng = np.random.default_rng(0)
    for _ in range(500):
        c = float(rng.uniform(-1, 1))
        triple = ScalarTriple(q=1.0, r=0.0, s=float(10 ** rng.uniform(-4, 1)))
        d1 = float(10 ** rng.uniform(-4, 0))
        d2 = d1 * float(10 ** rng.uniform(0, 2))
        if classify(_subp(c, d1), triple).verdict is Feasibility.FEASIBLE:
            assert classify(_subp(c, d2), triple).verdict is Feasibility.FEASIBLE
