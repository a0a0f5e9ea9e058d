# pcpolab/nn/fisher.py
from __future__ import annotations
from dataclasses import dataclass, field

import numpy as np

from pcpolab.errors import ContractViolation
from pcpolab.nn.gaussian import DistParams, DistTangent, fisher_diag, kl_diag_gauss
from pcpolab.nn.mlp import Mlp


@dataclass(frozen=True)
class FisherHandle:
    """Implicit Hessian of the mean policy KL at `params` over a batch of states.

    Calling the handle on a parameter-shaped vector returns
    (1/N) sum_s J(s)^T F(s) J(s) v + damping * v, where J is the Jacobian of
    (mu, sigma) w.r.t. the parameters and F the Gaussian Fisher matrix.
    """
    net: Mlp
    params: np.ndarray
    states: np.ndarray
    damping: float = 1e-2
    _fisher: DistTangent = field(init=False, repr=False)

    def __post_init__(self):
        if not self.net.is_policy:
            raise ContractViolation("Fisher products need a Gaussian policy network")
        states = np.atleast_2d(np.asarray(self.states, dtype=np.float64))
        if states.shape[0] == 0:
            raise ContractViolation("Fisher batch is empty")
        if self.damping < 0:
            raise ContractViolation("damping must be >= 0")
        object.__setattr__(self, "states", states)
        dist = self.net.forward(self.params, states)
        object.__setattr__(self, "_fisher", fisher_diag(dist))

    @property
    def dim(self) -> int:
        return self.net.n_params

    def __call__(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise ContractViolation("non-finite vector in Fisher product")
        t = self.net.jvp(self.params, self.states, v)
        cot = DistTangent(mu=self._fisher.mu * t.mu, sigma=self._fisher.sigma * t.sigma)
        g, _ = self.net.vjp(self.params, self.states, cot)
        return g / self.states.shape[0] + self.damping * v


def mean_kl(net: Mlp, theta_new: np.ndarray, theta_old: np.ndarray, states: np.ndarray) -> float:
    """Mean over states of D_KL(pi_new(s) || pi_old(s)), new policy first."""
    states = np.atleast_2d(states)
    p: DistParams = net.forward(theta_new, states)
    q: DistParams = net.forward(theta_old, states)
    return float(np.mean(kl_diag_gauss(p, q)))
