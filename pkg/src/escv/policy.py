"""Gaussian policies with exact log-density gradients.

MlpPolicy is the training policy: a two-hidden-layer relu network producing
the action mean, plus a state-independent log-std vector, all flattened into
one parameter vector. LinearGaussianPolicy is the stateless mean-only policy
used by the one-step analysis and the unbiasedness tests.

Parameter layout for MlpPolicy (documented so checkpoints are portable):
w1 row-major, b1, w2, b2, w3, b3, log_std. Weight matrices are (out, in).
"""

from __future__ import annotations

import json
import math

import numpy as np

from . import kernels
from .rng import RngStream

LOG_TWO_PI = math.log(2.0 * math.pi)
LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0


class MlpPolicy:
    def __init__(self, state_dim: int, action_dim: int, hidden=(32, 32)):
        if len(hidden) != 2:
            raise ValueError("MlpPolicy uses exactly two hidden layers")
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.hidden = tuple(hidden)
        sizes = [state_dim, *hidden, action_dim]
        self._shapes = []
        offset = 0
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            self._shapes.append((offset, (n_out, n_in)))
            offset += n_out * n_in
            self._shapes.append((offset, (n_out,)))
            offset += n_out
        self._log_std_offset = offset
        self.num_params = offset + action_dim

    def init_params(self, stream: RngStream) -> np.ndarray:
        """Glorot-uniform weights, zero biases, log_std at 0 (unit action std)."""
        theta = np.zeros(self.num_params)
        for offset, shape in self._shapes:
            if len(shape) == 2:
                n_out, n_in = shape
                limit = math.sqrt(6.0 / (n_in + n_out))
                block = stream.uniform((n_out, n_in)) * 2.0 * limit - limit
                theta[offset : offset + n_out * n_in] = block.ravel()
        return theta

    def split(self, theta: np.ndarray):
        """Views (w1, b1, w2, b2, w3, b3, log_std) into the flat vector."""
        parts = []
        for offset, shape in self._shapes:
            size = int(np.prod(shape))
            parts.append(theta[offset : offset + size].reshape(shape))
        parts.append(theta[self._log_std_offset :])
        return tuple(parts)

    def flatten(self, parts) -> np.ndarray:
        theta = np.empty(self.num_params)
        for (offset, shape), part in zip(self._shapes, parts[:-1]):
            size = int(np.prod(shape))
            theta[offset : offset + size] = np.asarray(part, dtype=float).ravel()
        theta[self._log_std_offset :] = parts[-1]
        return theta

    def _check_state(self, state):
        if state.shape[0] != self.state_dim:
            raise ValueError(f"state dimension {state.shape[0]} != {self.state_dim}")

    def _forward(self, theta, state):
        # fresh buffers per call: rollout workers share the policy across threads
        w1, b1, w2, b2, w3, b3, _ = self.split(theta)
        h1 = np.empty(self.hidden[0])
        h2 = np.empty(self.hidden[1])
        mean = np.empty(self.action_dim)
        kernels.mlp2_forward(state, w1, b1, w2, b2, w3, b3, h1, h2, mean)
        return mean, h1, h2

    def forward_mean(self, theta: np.ndarray, state: np.ndarray) -> np.ndarray:
        state = np.ascontiguousarray(state, dtype=float)
        self._check_state(state)
        mean, _, _ = self._forward(theta, state)
        return mean

    def sample_action(self, theta, state, stream: RngStream):
        action, log_prob, _ = self._sample(theta, state, stream, want_grad=False)
        return action, log_prob

    def sample_action_with_grad(self, theta, state, stream: RngStream, grad_out=None):
        return self._sample(theta, state, stream, want_grad=True, grad_out=grad_out)

    def _sample(self, theta, state, stream, want_grad, grad_out=None):
        state = np.ascontiguousarray(state, dtype=float)
        self._check_state(state)
        mean, h1, h2 = self._forward(theta, state)
        log_std = theta[self._log_std_offset :]
        std = np.exp(log_std)
        z = stream.standard_normal(self.action_dim)
        action = mean + std * z
        log_prob = float(-log_std.sum() - 0.5 * self.action_dim * LOG_TWO_PI - 0.5 * (z @ z))
        grad = None
        if want_grad:
            grad = grad_out if grad_out is not None else np.empty(self.num_params)
            _, _, w2, _, w3, _, _ = self.split(theta)
            delta = z / std
            kernels.mlp2_backward(state, h1, h2, w2, w3, delta, grad[: self._log_std_offset])
            grad[self._log_std_offset :] = z * z - 1.0
        return action, log_prob, grad

    def log_prob(self, theta, state, action) -> float:
        state = np.ascontiguousarray(state, dtype=float)
        self._check_state(state)
        mean, _, _ = self._forward(theta, state)
        log_std = theta[self._log_std_offset :]
        z = (action - mean) / np.exp(log_std)
        return float(-log_std.sum() - 0.5 * self.action_dim * LOG_TWO_PI - 0.5 * (z @ z))

    def log_prob_grad(self, theta, state, action, out=None) -> np.ndarray:
        """Exact gradient of log pi(action | state) wrt the flat parameters."""
        state = np.ascontiguousarray(state, dtype=float)
        self._check_state(state)
        mean, h1, h2 = self._forward(theta, state)
        log_std = theta[self._log_std_offset :]
        std = np.exp(log_std)
        z = (np.asarray(action, dtype=float) - mean) / std
        grad = out if out is not None else np.empty(self.num_params)
        _, _, w2, _, w3, _, _ = self.split(theta)
        delta = z / std
        kernels.mlp2_backward(state, h1, h2, w2, w3, delta, grad[: self._log_std_offset])
        grad[self._log_std_offset :] = z * z - 1.0
        return grad

    def clamp_log_std(self, theta: np.ndarray) -> np.ndarray:
        """Keep action stds away from collapse; mutates and returns theta."""
        np.clip(theta[self._log_std_offset :], LOG_STD_MIN, LOG_STD_MAX, out=theta[self._log_std_offset :])
        return theta

    def checkpoint_header(self) -> dict:
        return {
            "kind": "mlp",
            "state_dim": self.state_dim,
            "action_dim": self.action_dim,
            "hidden": list(self.hidden),
            "param_dim": self.num_params,
        }


class LinearGaussianPolicy:
    """Gaussian over actions with the flat parameters as the mean; fixed std.

    The state is ignored, matching the one-step setting where the policy is
    just a perturbable mean vector.
    """

    def __init__(self, action_dim: int, std: float = 1.0):
        if std <= 0:
            raise ValueError("std must be positive")
        self.state_dim = None  # accepts any state
        self.action_dim = action_dim
        self.std = float(std)
        self.num_params = action_dim

    def init_params(self, stream: RngStream) -> np.ndarray:
        return np.zeros(self.num_params)

    def forward_mean(self, theta, state) -> np.ndarray:
        return np.asarray(theta, dtype=float).copy()

    def sample_action(self, theta, state, stream: RngStream):
        action, log_prob, _ = self.sample_action_with_grad(theta, state, stream)
        return action, log_prob

    def sample_action_with_grad(self, theta, state, stream: RngStream, grad_out=None):
        z = stream.standard_normal(self.action_dim)
        action = theta + self.std * z
        log_prob = float(
            -self.action_dim * math.log(self.std)
            - 0.5 * self.action_dim * LOG_TWO_PI
            - 0.5 * (z @ z)
        )
        grad = grad_out if grad_out is not None else np.empty(self.num_params)
        grad[:] = z / self.std
        return action, log_prob, grad

    def log_prob(self, theta, state, action) -> float:
        z = (np.asarray(action, dtype=float) - theta) / self.std
        return float(
            -self.action_dim * math.log(self.std)
            - 0.5 * self.action_dim * LOG_TWO_PI
            - 0.5 * (z @ z)
        )

    def log_prob_grad(self, theta, state, action, out=None) -> np.ndarray:
        grad = out if out is not None else np.empty(self.num_params)
        grad[:] = (np.asarray(action, dtype=float) - theta) / self.std**2
        return grad

    def clamp_log_std(self, theta: np.ndarray) -> np.ndarray:
        return theta

    def checkpoint_header(self) -> dict:
        return {
            "kind": "linear_mean",
            "action_dim": self.action_dim,
            "std": self.std,
            "param_dim": self.num_params,
        }


def save_checkpoint(path, policy, theta: np.ndarray) -> None:
    """Text checkpoint: JSON header line, then one parameter per line."""
    lines = [json.dumps(policy.checkpoint_header(), sort_keys=True)]
    lines.extend(repr(float(v)) for v in theta)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path):
    """Returns (policy, theta) reconstructed from a checkpoint file."""
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        values = np.array([float(line) for line in fh if line.strip()])
    if header["kind"] == "mlp":
        policy = MlpPolicy(header["state_dim"], header["action_dim"], tuple(header["hidden"]))
    elif header["kind"] == "linear_mean":
        policy = LinearGaussianPolicy(header["action_dim"], header["std"])
    else:
        raise ValueError(f"unknown policy kind {header['kind']!r}")
    if values.shape[0] != header["param_dim"] or values.shape[0] != policy.num_params:
        raise ValueError("checkpoint parameter count does not match header")
    return policy, values
