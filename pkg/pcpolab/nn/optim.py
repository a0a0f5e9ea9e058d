# pcpolab/nn/optim.py
from __future__ import annotations
from typing import Tuple

import numpy as np

from pcpolab.errors import ContractViolation
from pcpolab.utils.logging import get_logger

log = get_logger(__name__)

OPTIMIZERS = ("sgd", "adam")


def sgd_step(params: np.ndarray, grad: np.ndarray, lr: float) -> Tuple[np.ndarray, bool]:
    """params - lr * grad (descent). Returns (new_params, applied).

    A non-finite gradient skips the step: params come back unchanged, applied=False.
    """
    if not lr > 0:
        raise ContractViolation(f"learning rate must be > 0, got {lr}")
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != np.shape(params):
        raise ContractViolation("gradient shape does not match parameters")
    if not np.all(np.isfinite(grad)):
        log.warning("non-finite gradient, SGD step skipped")
        return params, False
    return params - lr * grad, True


class Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: np.ndarray, grad: np.ndarray) -> Tuple[np.ndarray, bool]:
        return sgd_step(params, grad, self.lr)


class Adam:
    def __init__(self, lr: float, n_params: int, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if not lr > 0:
            raise ContractViolation(f"learning rate must be > 0, got {lr}")
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> Tuple[np.ndarray, bool]:
        grad = np.asarray(grad, dtype=np.float64)
        if not np.all(np.isfinite(grad)):
            log.warning("non-finite gradient, Adam step skipped")
            return params, False
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps), True


def make_optimizer(kind: str, lr: float, n_params: int):
    if kind == "sgd":
        return Sgd(lr)
    if kind == "adam":
        return Adam(lr, n_params)
    raise ContractViolation(f"unknown optimizer {kind!r}; expected one of {OPTIMIZERS}")
