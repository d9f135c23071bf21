"""Native desk-scale environments behind one episodic interface.

Each environment exposes state_dim, action_dim, horizon, reset(stream) and
step(state, action, stream). Episodes have a fixed horizon; rollout() runs
one and caches per-step score gradients for the policy-gradient estimator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import RngStream


class RolloutError(RuntimeError):
    """A rollout produced a non-finite reward (diverging dynamics or bad config)."""


@dataclass
class Trajectory:
    states: np.ndarray  # (T, state_dim)
    actions: np.ndarray  # (T, action_dim)
    rewards: np.ndarray  # (T,)
    score_grads: np.ndarray | None  # (T, num_params) or None for eval rollouts


class OneStepLinearEnv:
    """Single action, reward alpha . action; the state is a fixed zero vector."""

    kind = "one_step_linear"

    def __init__(self, alpha, state_dim: int = 4):
        self.alpha = np.asarray(alpha, dtype=float)
        if not np.all(np.isfinite(self.alpha)):
            raise ValueError("alpha must be finite")
        self.state_dim = state_dim
        self.action_dim = self.alpha.shape[0]
        self.horizon = 1

    def reset(self, stream: RngStream) -> np.ndarray:
        return np.zeros(self.state_dim)

    def step(self, state, action, stream: RngStream):
        return state, float(self.alpha @ action)

    def analytic_objective(self, mu) -> float:
        """Expected reward of a Gaussian policy with mean mu (any covariance)."""
        mu = np.asarray(mu, dtype=float)
        if mu.shape[0] != self.action_dim:
            raise ValueError("mean dimension does not match alpha")
        return float(self.alpha @ mu)


def _fixed_rotation(n: int) -> np.ndarray:
    """A versioned orthogonal matrix (fixed seed, sign-normalized QR)."""
    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(1118481)))
    q, r = np.linalg.qr(gen.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


class LqrEnv:
    """Linear dynamics with quadratic costs: reward = -(s'Qs + a'Ra)."""

    kind = "lqr"

    def __init__(self, A, B, Q, R, process_noise_std=0.05, init_state_std=1.0, horizon=200):
        self.A = np.asarray(A, dtype=float)
        self.B = np.asarray(B, dtype=float)
        self.Q = np.asarray(Q, dtype=float)
        self.R = np.asarray(R, dtype=float)
        self.process_noise_std = float(process_noise_std)
        self.init_state_std = float(init_state_std)
        self.horizon = int(horizon)
        self.state_dim = self.A.shape[0]
        self.action_dim = self.B.shape[1]
        if self.A.shape != (self.state_dim, self.state_dim):
            raise ValueError("A must be square")
        if self.B.shape[0] != self.state_dim:
            raise ValueError("B row count must match the state dimension")

    @classmethod
    def default(cls, horizon: int = 200) -> "LqrEnv":
        """The versioned 4-dim instance: A = 0.9 I + 0.05 rotation, B = Q = R = I."""
        n = 4
        a = 0.9 * np.eye(n) + 0.05 * _fixed_rotation(n)
        return cls(a, np.eye(n), np.eye(n), np.eye(n), horizon=horizon)

    def reset(self, stream: RngStream) -> np.ndarray:
        return self.init_state_std * stream.standard_normal(self.state_dim)

    def step(self, state, action, stream: RngStream):
        nxt = self.A @ state + self.B @ action
        if self.process_noise_std > 0:
            nxt = nxt + self.process_noise_std * stream.standard_normal(self.state_dim)
        reward = -(state @ self.Q @ state + action @ self.R @ action)
        return nxt, float(reward)


class PointMassEnv:
    """Damped 2-D point mass pushed toward a goal; quadratic control cost.

    Per axis, (position, velocity) evolve under a contraction (operator norm
    below 1), so with zero actions the state norm never grows.
    """

    kind = "point_mass"

    # per-axis (p, v) dynamics; force enters the velocity row
    _A2 = np.array([[0.98, 0.08], [-0.03, 0.85]])
    _B2 = np.array([0.004, 0.08])

    def __init__(self, horizon=100, goal=(1.0, 1.0), process_noise_std=0.01,
                 init_state_std=0.1, action_cost=0.01):
        self.horizon = int(horizon)
        self.goal = np.asarray(goal, dtype=float)
        self.process_noise_std = float(process_noise_std)
        self.init_state_std = float(init_state_std)
        self.action_cost = float(action_cost)
        self.state_dim = 4  # (px, vx, py, vy)
        self.action_dim = 2

    def reset(self, stream: RngStream) -> np.ndarray:
        return self.init_state_std * stream.standard_normal(self.state_dim)

    def step(self, state, action, stream: RngStream):
        nxt = np.empty(4)
        for axis in range(2):
            pv = state[2 * axis : 2 * axis + 2]
            nxt[2 * axis : 2 * axis + 2] = self._A2 @ pv + self._B2 * action[axis]
        if self.process_noise_std > 0:
            nxt[1::2] += self.process_noise_std * stream.standard_normal(2)
        pos = state[0::2]
        dist_sq = float((pos - self.goal) @ (pos - self.goal))
        reward = -(dist_sq + self.action_cost * float(action @ action))
        return nxt, reward


def rollout(env, policy, theta, stream: RngStream, gamma_eval: float = 1.0,
            collect_scores: bool = True):
    """Run one fixed-horizon episode.

    Returns (Trajectory, discounted_return, undiscounted_return). The
    discounted return uses gamma_eval; with gamma_eval = 1 the two returns
    are identical by construction.
    """
    if not 0.0 < gamma_eval <= 1.0:
        raise ValueError("gamma_eval must lie in (0, 1]")
    horizon = env.horizon
    states = np.empty((horizon, env.state_dim))
    actions = np.empty((horizon, env.action_dim))
    rewards = np.empty(horizon)
    scores = np.empty((horizon, policy.num_params)) if collect_scores else None

    state = env.reset(stream)
    for t in range(horizon):
        states[t] = state
        if collect_scores:
            action, _, _ = policy.sample_action_with_grad(theta, state, stream, grad_out=scores[t])
        else:
            action, _ = policy.sample_action(theta, state, stream)
        actions[t] = action
        state, reward = env.step(state, action, stream)
        if not np.isfinite(reward):
            raise RolloutError(f"non-finite reward at step {t}")
        rewards[t] = reward

    undiscounted = float(np.sum(rewards))
    if gamma_eval == 1.0:
        discounted = undiscounted
    else:
        weights = gamma_eval ** np.arange(horizon)
        discounted = float(np.sum(weights * rewards))
    return Trajectory(states, actions, rewards, scores), discounted, undiscounted
