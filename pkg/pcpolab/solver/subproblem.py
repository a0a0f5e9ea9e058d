# pcpolab/solver/subproblem.py
"""Linearized constrained trust-region subproblem.

    max_x  g'x   s.t.  c + b'x <= 0,   1/2 x'Hx <= delta

g and b are score-function gradients of the Q- and risk-weighted surrogates
at the current parameters, H the Hessian of the mean KL (Fisher product).
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import Optional

import numpy as np

from pcpolab.errors import ContractViolation
from pcpolab.nn.fisher import FisherHandle
from pcpolab.nn.gaussian import DistTangent, log_prob_grad
from pcpolab.nn.mlp import Mlp
from pcpolab.rollout.collect import Batch, Feasibility
from pcpolab.solver.cg import CgResult, Hvp, conjugate_gradient

S_EPS = 1e-12


@dataclass(frozen=True)
class Subproblem:
    g: np.ndarray
    b: np.ndarray
    c: float
    delta: float
    hvp: Hvp

    def __post_init__(self):
        if not self.delta > 0:
            raise ContractViolation("trust radius delta must be > 0")
        if not (np.all(np.isfinite(self.g)) and np.all(np.isfinite(self.b))):
            raise ContractViolation("non-finite subproblem gradient")


@dataclass(frozen=True)
class ScalarTriple:
    q: float   # g' H^-1 g
    r: float   # b' H^-1 g
    s: float   # b' H^-1 b
    x_g: Optional[np.ndarray] = None
    x_b: Optional[np.ndarray] = None
    cg_converged: bool = True


@dataclass(frozen=True)
class FeasibilityIndexes:
    c: float
    e: float
    verdict: Feasibility
    constraint_active: bool = True


def weighted_score_gradient(policy: Mlp, params: np.ndarray, states: np.ndarray,
                            actions: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """(1/N) sum_i w_i * grad_theta log pi(a_i | s_i)."""
    dist = policy.forward(params, states)
    lg = log_prob_grad(dist, actions)
    w = np.asarray(weights, dtype=np.float64)[:, None] / len(weights)
    grad, _ = policy.vjp(params, states, DistTangent(lg.mu * w, lg.sigma * w))
    return grad


def build_subproblem(batch: Batch, policy: Mlp, params: np.ndarray, q_weights: np.ndarray,
                     q_tilde_weights: np.ndarray, d: float, delta: float,
                     damping: float = 1e-2, center_q: bool = False) -> Subproblem:
    batch.require_nonempty()
    states, actions = batch.states, batch.actions
    if center_q:
        q_weights = q_weights - q_weights.mean()
        q_tilde_weights = q_tilde_weights - q_tilde_weights.mean()
    g = weighted_score_gradient(policy, params, states, actions, q_weights)
    b = weighted_score_gradient(policy, params, states, actions, q_tilde_weights)
    c = float(np.mean(batch.risk_targets[batch.segment_starts])) - d
    return Subproblem(g=g, b=b, c=c, delta=delta, hvp=FisherHandle(policy, params, states, damping))


def solve_triple(subp: Subproblem, max_iters: int = 20, tol: float = 1e-8) -> ScalarTriple:
    rg: CgResult = conjugate_gradient(subp.hvp, subp.g, max_iters, tol)
    rb: CgResult = conjugate_gradient(subp.hvp, subp.b, max_iters, tol)
    return ScalarTriple(
        q=max(float(subp.g @ rg.x), 0.0),
        r=float(subp.b @ rg.x),
        s=max(float(subp.b @ rb.x), 0.0),
        x_g=rg.x,
        x_b=rb.x,
        cg_converged=rg.converged and rb.converged,
    )


def classify(subp: Subproblem, triple: ScalarTriple) -> FeasibilityIndexes:
    """Infeasible iff c > 0 and e = delta - c^2/s < 0.

    A vanishing risk gradient (s ~ 0) leaves nothing to trade against, so the
    set counts as feasible with the constraint inactive and e reported as delta.
    """
    c = subp.c
    if triple.s <= S_EPS:
        return FeasibilityIndexes(c=c, e=subp.delta, verdict=Feasibility.FEASIBLE, constraint_active=False)
    e = subp.delta - c * c / triple.s
    verdict = Feasibility.INFEASIBLE if (c > 0 and e < 0) else Feasibility.FEASIBLE
    return FeasibilityIndexes(c=c, e=e, verdict=verdict)
