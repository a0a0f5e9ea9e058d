# pcpolab/nn/gaussian.py
from __future__ import annotations
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from pcpolab.errors import ContractViolation

LOG_2PI = float(np.log(2.0 * np.pi))

Real = Union[float, np.ndarray]


@dataclass(frozen=True)
class DistParams:
    """Diagonal Gaussian: mean and standard deviation in action units.

    Arrays are (A,) for one state or (N, A) for a batch.
    """
    mu: np.ndarray
    sigma: np.ndarray

    def row(self, i: int) -> "DistParams":
        return DistParams(self.mu[i], self.sigma[i])


class DistTangent(NamedTuple):
    """A (mu, sigma)-shaped pair of derivatives: tangents or cotangents."""
    mu: np.ndarray
    sigma: np.ndarray


def _check_sigma(d: DistParams) -> None:
    if np.any(~(np.asarray(d.sigma) > 0)):
        raise ContractViolation("sigma must be strictly positive")


def log_prob(d: DistParams, a: np.ndarray) -> Real:
    """Diagonal-Gaussian log density summed over the action dimensions."""
    _check_sigma(d)
    a = np.asarray(a, dtype=np.float64)
    z = (a - d.mu) / d.sigma
    lp = -0.5 * z * z - np.log(d.sigma) - 0.5 * LOG_2PI
    out = lp.sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def log_prob_grad(d: DistParams, a: np.ndarray) -> DistTangent:
    """d log_prob / d(mu, sigma), same shapes as the distribution."""
    _check_sigma(d)
    diff = np.asarray(a, dtype=np.float64) - d.mu
    inv = 1.0 / d.sigma
    return DistTangent(mu=diff * inv * inv, sigma=diff * diff * inv ** 3 - inv)


def sample(d: DistParams, rng: np.random.Generator) -> np.ndarray:
    """a = mu + sigma * z. No clipping here: the environment clips."""
    z = rng.standard_normal(np.shape(d.mu))
    return d.mu + d.sigma * z


def kl_diag_gauss(p: DistParams, q: DistParams) -> Real:
    """Closed-form D_KL(p || q), summed over dimensions."""
    _check_sigma(p)
    _check_sigma(q)
    var_ratio = (p.sigma / q.sigma) ** 2
    mean_term = ((p.mu - q.mu) / q.sigma) ** 2
    kl = 0.5 * (var_ratio + mean_term - 1.0) - np.log(p.sigma / q.sigma)
    # exact zeros only when p == q; clamp the tiny negative round-off
    out = np.maximum(kl.sum(axis=-1), 0.0)
    return float(out) if np.ndim(out) == 0 else out


def fisher_diag(d: DistParams) -> DistTangent:
    """Fisher information of N(mu, sigma^2) in (mu, sigma) coordinates (diagonal)."""
    inv_var = 1.0 / (d.sigma * d.sigma)
    return DistTangent(mu=inv_var, sigma=2.0 * inv_var)


def clip_action(a: np.ndarray, low: np.ndarray, high: np.ndarray) -> np.ndarray:
    return np.clip(a, low, high)
