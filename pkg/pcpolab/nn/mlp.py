# pcpolab/nn/mlp.py
from __future__ import annotations
import json
from dataclasses import dataclass, field
from typing import List, Tuple, Union

import numpy as np

from pcpolab.errors import ContractViolation, NumericalError
from pcpolab.nn.gaussian import DistParams, DistTangent
from pcpolab.utils.io import hash_u64

SIGMA_FLOOR = 1e-4

Layer = Tuple[np.ndarray, np.ndarray]


# --------- Spec ---------
@dataclass(frozen=True)
class LinearHead:
    output_dim: int = 1


@dataclass(frozen=True)
class GaussianHead:
    """mu = low + (high-low)(tanh(z)+1)/2, sigma = softplus(z) + floor."""
    action_low: Tuple[float, ...]
    action_high: Tuple[float, ...]

    @property
    def action_dim(self) -> int:
        return len(self.action_low)


Head = Union[LinearHead, GaussianHead]


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden: Tuple[int, ...]
    head: Head = field(default_factory=LinearHead)
    hidden_activation: str = "elu"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim < 1 or any(h < 1 for h in self.hidden):
            raise ContractViolation(f"layer widths must be >= 1: {self.input_dim}, {self.hidden}")
        if self.hidden_activation != "elu":
            raise ContractViolation(f"unsupported activation {self.hidden_activation!r}")
        if isinstance(self.head, GaussianHead):
            lo = np.asarray(self.head.action_low, dtype=np.float64)
            hi = np.asarray(self.head.action_high, dtype=np.float64)
            if lo.shape != hi.shape or lo.size == 0 or np.any(lo >= hi):
                raise ContractViolation("action_low < action_high required elementwise")
        elif self.head.output_dim < 1:
            raise ContractViolation("output_dim must be >= 1")

    @property
    def out_units(self) -> int:
        if isinstance(self.head, GaussianHead):
            return 2 * self.head.action_dim
        return self.head.output_dim

    @property
    def layer_shapes(self) -> List[Tuple[int, int]]:
        widths = [self.input_dim, *self.hidden, self.out_units]
        return list(zip(widths[:-1], widths[1:]))

    @property
    def n_params(self) -> int:
        return sum(i * o + o for i, o in self.layer_shapes)

    def to_dict(self) -> dict:
        head = (
            {"kind": "gaussian", "action_low": list(self.head.action_low),
             "action_high": list(self.head.action_high)}
            if isinstance(self.head, GaussianHead)
            else {"kind": "linear", "output_dim": self.head.output_dim}
        )
        return {"input_dim": self.input_dim, "hidden": list(self.hidden),
                "hidden_activation": self.hidden_activation, "head": head}

    def spec_hash(self) -> int:
        return hash_u64(json.dumps(self.to_dict(), sort_keys=True))


# --------- Activations ---------
def elu(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0, z, np.expm1(np.minimum(z, 0.0)))


def elu_grad(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0, 1.0, np.exp(np.minimum(z, 0.0)))


def softplus(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


# --------- Network ---------
class Mlp:
    """Fully-connected network evaluated on caller-owned flat parameter vectors.

    Parameters are flattened layer-major, each layer's (fan_in, fan_out) weight
    matrix in row-major order followed by its bias. The object itself holds no
    parameters, so one instance can be shared by any number of readers.
    """

    def __init__(self, spec: MlpSpec):
        self.spec = spec
        if isinstance(spec.head, GaussianHead):
            self._low = np.asarray(spec.head.action_low, dtype=np.float64)
            self._high = np.asarray(spec.head.action_high, dtype=np.float64)

    @property
    def n_params(self) -> int:
        return self.spec.n_params

    @property
    def is_policy(self) -> bool:
        return isinstance(self.spec.head, GaussianHead)

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        layers = []
        for fan_in, fan_out in self.spec.layer_shapes:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            layers.append((rng.uniform(-limit, limit, size=(fan_in, fan_out)), np.zeros(fan_out)))
        return self.flatten(layers)

    # --- flat <-> layers ---
    def unflatten(self, params: np.ndarray) -> List[Layer]:
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (self.n_params,):
            raise ContractViolation(f"expected {self.n_params} parameters, got shape {params.shape}")
        out, k = [], 0
        for fan_in, fan_out in self.spec.layer_shapes:
            W = params[k:k + fan_in * fan_out].reshape(fan_in, fan_out)
            k += fan_in * fan_out
            b = params[k:k + fan_out]
            k += fan_out
            out.append((W, b))
        return out

    def flatten(self, layers: List[Layer]) -> np.ndarray:
        parts = []
        for (W, b), (fan_in, fan_out) in zip(layers, self.spec.layer_shapes):
            if W.shape != (fan_in, fan_out) or b.shape != (fan_out,):
                raise ContractViolation("layer shapes do not match the network layout")
            parts.extend([W.ravel(), b])
        return np.concatenate(parts).astype(np.float64)

    # --- helpers ---
    def _batch(self, x: np.ndarray) -> Tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        X = x[None, :] if single else x
        if X.ndim != 2 or X.shape[1] != self.spec.input_dim:
            raise ContractViolation(f"input must have {self.spec.input_dim} entries, got shape {x.shape}")
        if not np.all(np.isfinite(X)):
            raise ContractViolation("non-finite network input")
        return X, single

    def _trace(self, layers: List[Layer], X: np.ndarray):
        pre, acts = [], [X]
        h = X
        last = len(layers) - 1
        for i, (W, b) in enumerate(layers):
            z = h @ W + b
            if not np.all(np.isfinite(z)):
                raise NumericalError("non-finite pre-activation", layer=i)
            pre.append(z)
            h = elu(z) if i < last else z
            acts.append(h)
        return pre, acts

    def _head(self, z: np.ndarray):
        if not self.is_policy:
            return z
        A = self.spec.head.action_dim
        mu = self._low + (self._high - self._low) * (np.tanh(z[:, :A]) + 1.0) / 2.0
        sigma = softplus(z[:, A:]) + SIGMA_FLOOR
        return DistParams(mu=mu, sigma=sigma)

    def _head_jacobian_diag(self, z: np.ndarray):
        A = self.spec.head.action_dim
        t = np.tanh(z[:, :A])
        return (self._high - self._low) / 2.0 * (1.0 - t * t), sigmoid(z[:, A:])

    # --- public API ---
    def forward(self, params: np.ndarray, x: np.ndarray):
        """Linear head -> (N, out) array; Gaussian head -> DistParams.

        A 1-D input gives 1-D outputs (no batch axis).
        """
        X, single = self._batch(x)
        pre, _ = self._trace(self.unflatten(params), X)
        out = self._head(pre[-1])
        if not single:
            return out
        return out.row(0) if isinstance(out, DistParams) else out[0]

    def value(self, params: np.ndarray, X: np.ndarray) -> np.ndarray:
        """Scalar-head convenience: (N,) values for a batch of inputs."""
        out = self.forward(params, np.atleast_2d(X))
        return out[:, 0]

    def vjp(self, params: np.ndarray, x: np.ndarray, cotangent) -> Tuple[np.ndarray, np.ndarray]:
        """Reverse-mode derivative.

        `cotangent` is an output-shaped array for a linear head or a
        DistTangent(mu, sigma) for a Gaussian head. The parameter gradient
        is summed over the batch.
        """
        X, single = self._batch(x)
        layers = self.unflatten(params)
        pre, acts = self._trace(layers, X)
        if self.is_policy:
            g_mu, g_sigma = (np.atleast_2d(c) for c in cotangent)
            d_mu, d_sigma = self._head_jacobian_diag(pre[-1])
            delta = np.concatenate([g_mu * d_mu, g_sigma * d_sigma], axis=1)
        else:
            delta = np.atleast_2d(np.asarray(cotangent, dtype=np.float64))
        if delta.shape != pre[-1].shape:
            raise ContractViolation(f"cotangent shape {delta.shape} != output shape {pre[-1].shape}")

        grads: List[Layer] = []
        for i in range(len(layers) - 1, -1, -1):
            W, _ = layers[i]
            grads.append((acts[i].T @ delta, delta.sum(axis=0)))
            dh = delta @ W.T
            if not np.all(np.isfinite(dh)):
                raise NumericalError("non-finite gradient", layer=i)
            if i > 0:
                delta = dh * elu_grad(pre[i - 1])
        grads.reverse()
        input_grad = dh[0] if single else dh
        return self.flatten(grads), input_grad

    def jvp(self, params: np.ndarray, x: np.ndarray, tangent: np.ndarray):
        """Forward-mode directional derivative along a parameter tangent."""
        X, single = self._batch(x)
        layers = self.unflatten(params)
        tlayers = self.unflatten(tangent)
        last = len(layers) - 1
        h, dh = X, np.zeros_like(X)
        for i, ((W, b), (dW, db)) in enumerate(zip(layers, tlayers)):
            z = h @ W + b
            dz = dh @ W + h @ dW + db
            if not (np.all(np.isfinite(z)) and np.all(np.isfinite(dz))):
                raise NumericalError("non-finite forward tangent", layer=i)
            if i < last:
                h, dh = elu(z), elu_grad(z) * dz
            else:
                h, dh = z, dz
        if self.is_policy:
            A = self.spec.head.action_dim
            d_mu, d_sigma = self._head_jacobian_diag(h)
            out = DistTangent(mu=d_mu * dh[:, :A], sigma=d_sigma * dh[:, A:])
            return DistTangent(out.mu[0], out.sigma[0]) if single else out
        return dh[0] if single else dh
