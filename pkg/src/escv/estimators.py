"""Gradient estimators and their control-variate combination.

Three estimators of the smoothed objective's gradient are built from one
shared batch of perturbations and rollouts (common random numbers):

  es_gradient   score-function estimator, undiscounted or discounted returns
  pg_gradient   per-rollout policy gradient of the discounted return
  re_gradient   average of per-rollout policy gradients (reparameterized form)

cv_gradient combines them: the undiscounted score-function estimate plus an
elementwise-scaled difference of the two discounted estimates, which has
zero mean and soaks up correlated noise. eta_variance_grad and
gamma_es_update adapt the scale vector and the discount online.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .rng import RngStream
from .sampling import PerturbationBatch

logger = logging.getLogger(__name__)

DEGENERATE_STD = 1e-8
PHI_MAX = -1e-6  # keeps gamma = 1 - exp(phi) strictly below 1


class EstimatorKind(str, enum.Enum):
    ES_UNDISCOUNTED = "es"
    ES_DISCOUNTED = "es_discounted"
    RE_DISCOUNTED = "re"
    CV = "cv"


class PgMode(str, enum.Enum):
    # STANDARD discounts the whole reward-to-go (unbiased for the discounted
    # objective); LITERAL applies the discount only at the action time.
    STANDARD = "standard"
    LITERAL = "literal"


@dataclass
class EsConfig:
    sigma: float = 0.02
    n_perturbations: int = 5
    rank_transform: bool = True
    normalize_returns: bool = True

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.n_perturbations < 1:
            raise ValueError("need at least one perturbation")


@dataclass
class CvState:
    eta: np.ndarray
    eta_lr: float = 1e-4
    phi: float = math.log(0.01)  # gamma = 0.99
    phi_lr: float = 1e-5
    sigma_phi: float = 0.02
    n_phi: int = 10

    def __post_init__(self):
        if self.phi >= 0:
            raise ValueError("phi must be negative so gamma stays below 1")

    @property
    def gamma(self) -> float:
        return 1.0 - math.exp(self.phi)

    @classmethod
    def initial(cls, dim: int, gamma0: float = 0.99, **kwargs) -> "CvState":
        if not 0.0 < gamma0 < 1.0:
            raise ValueError("gamma0 must lie in (0, 1)")
        return cls(eta=np.zeros(dim), phi=math.log(1.0 - gamma0), **kwargs)


@dataclass
class GradientEstimate:
    vector: np.ndarray
    kind: EstimatorKind
    gamma_used: float


def normalize_returns(returns):
    """Center and scale a batch of returns; returns (normalized, sigma_j).

    Uses the population std. When the batch is (numerically) constant the
    values are only centered and sigma_j = 1, so no noise gets amplified.
    """
    returns = np.asarray(returns, dtype=float)
    if returns.shape[0] < 2:
        raise ValueError("need at least two returns")
    centered = returns - returns.mean()
    sigma_j = float(np.sqrt(np.mean(centered * centered)))
    if sigma_j < DEGENERATE_STD:
        return centered, 1.0
    return centered / sigma_j, sigma_j


def es_gradient(returns, batch: PerturbationBatch, cfg: EsConfig,
                kind: EstimatorKind = EstimatorKind.ES_UNDISCOUNTED,
                gamma_used: float = 1.0) -> GradientEstimate:
    """Score-function estimator: mean_i returns_i * eps_i / sigma.

    The caller passes returns already rank-transformed or normalized as its
    pipeline requires; this routine is linear in them.
    """
    returns = np.asarray(returns, dtype=float)
    if returns.shape[0] != batch.size:
        raise ValueError("one return per perturbation is required")
    vector = batch.directions.T @ returns / (batch.size * cfg.sigma)
    return GradientEstimate(vector, kind, gamma_used)


def pg_gradient(trajectory, gamma: float, mode: PgMode = PgMode.STANDARD) -> np.ndarray:
    """Policy gradient of one trajectory from its cached score gradients."""
    if trajectory.score_grads is None:
        raise ValueError("trajectory carries no score gradients")
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    rewards = trajectory.rewards
    horizon = rewards.shape[0]
    powers = gamma ** np.arange(horizon)
    if mode == PgMode.STANDARD:
        weights = np.cumsum((powers * rewards)[::-1])[::-1]
    else:
        weights = powers * np.cumsum(rewards[::-1])[::-1]
    return trajectory.score_grads.T @ weights


def re_gradient(pg_estimates, gamma_used: float) -> GradientEstimate:
    """Average the per-rollout policy gradients of the perturbed policies."""
    pg_estimates = np.asarray(pg_estimates, dtype=float)
    if pg_estimates.ndim != 2:
        raise ValueError("expected one gradient row per rollout")
    vector = pg_estimates.mean(axis=0)
    return GradientEstimate(vector, EstimatorKind.RE_DISCOUNTED, gamma_used)


def cv_gradient(es_undiscounted: GradientEstimate, es_discounted: GradientEstimate,
                re_discounted: GradientEstimate, cv: CvState,
                sigma_j: float = 1.0) -> GradientEstimate:
    """Control-variate combination (all inputs from the same rollouts).

    The correction term is divided by sigma_j when return normalization is
    active, keeping the whole estimate on the normalized scale.
    """
    if es_discounted.gamma_used != re_discounted.gamma_used:
        raise ValueError("discounted estimates were built with different gammas")
    diff = (es_discounted.vector - re_discounted.vector) / sigma_j
    vector = es_undiscounted.vector + cv.eta * diff
    return GradientEstimate(vector, EstimatorKind.CV, es_discounted.gamma_used)


def eta_variance_grad(es_undiscounted: GradientEstimate, es_discounted: GradientEstimate,
                      re_discounted: GradientEstimate, cv: CvState,
                      sigma_j: float = 1.0) -> np.ndarray:
    """Single-sample estimate of the variance gradient wrt eta.

    With D the scaled difference of the discounted estimates, the gradient
    is 2 eta D^2 + 2 D es1 elementwise; the caller applies
    eta <- eta - eta_lr * grad.
    """
    if es_discounted.gamma_used != re_discounted.gamma_used:
        raise ValueError("discounted estimates were built with different gammas")
    diff = (es_discounted.vector - re_discounted.vector) / sigma_j
    return 2.0 * cv.eta * diff * diff + 2.0 * diff * es_undiscounted.vector


def gamma_es_update(variance_blackbox, cv: CvState, stream: RngStream) -> CvState:
    """One smoothed-gradient step on the discount parameterization.

    phi is perturbed with n_phi scalar Gaussians, the variance blackbox is
    evaluated at each gamma(phi'), and the score-weighted average descends
    phi. Non-finite blackbox values skip the update.
    """
    if cv.phi_lr == 0.0:
        return cv
    eps = stream.standard_normal(cv.n_phi)
    values = np.empty(cv.n_phi)
    for i in range(cv.n_phi):
        phi_perturbed = min(cv.phi + cv.sigma_phi * eps[i], PHI_MAX)
        values[i] = variance_blackbox(1.0 - math.exp(phi_perturbed))
    if not np.all(np.isfinite(values)):
        logger.warning("variance blackbox returned non-finite values; skipping gamma update")
        return cv
    grad_phi = float(np.mean(values * eps) / cv.sigma_phi)
    new_phi = min(cv.phi - cv.phi_lr * grad_phi, PHI_MAX)
    return replace(cv, phi=new_phi)
