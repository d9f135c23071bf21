"""Bias-corrected Adam, kept functional so updates are easy to replay."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def initial(cls, dim: int, learning_rate: float, **kwargs) -> "AdamState":
        return cls(np.zeros(dim), np.zeros(dim), 0, learning_rate, **kwargs)


def adam_step(state: AdamState, gradient: np.ndarray, params: np.ndarray):
    """One descent step; returns (new params, new state).

    Callers maximizing a reward pass the negated gradient.
    """
    if gradient.shape != params.shape or state.first_moment.shape != params.shape:
        raise ValueError("gradient/parameter dimension mismatch")
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * gradient
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * gradient * gradient
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, replace(state, first_moment=m, second_moment=v, step_count=t)
