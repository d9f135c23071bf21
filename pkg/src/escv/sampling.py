"""Perturbation-direction samplers: IID, antithetic, orthogonal, GCMC, QMC.

Directions are emitted unscaled (standard-normal marginals); the estimator
applies the smoothing std. Paired schemes store the pairing so downstream
code can exploit the coupling.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .mathkit import (
    RankDeficientError,
    chi_norm_cdf,
    chi_norm_quantile,
    gram_schmidt_orthogonalize,
    halton_sequence,
    inverse_normal_cdf,
)
from .rng import RngStream


class Scheme(str, enum.Enum):
    IID = "iid"
    ANTITHETIC = "antithetic"
    ORTHO = "ortho"
    GCMC = "gcmc"
    QMC = "qmc"


@dataclass
class PerturbationBatch:
    directions: np.ndarray  # (n, d)
    scheme: Scheme
    pair_index: np.ndarray | None = None  # involution mapping i -> antithetic partner

    @property
    def size(self) -> int:
        return self.directions.shape[0]

    @property
    def dim(self) -> int:
        return self.directions.shape[1]


def _paired(first_half: np.ndarray, scheme: Scheme) -> PerturbationBatch:
    n = first_half.shape[0]
    directions = np.concatenate([first_half, -first_half], axis=0)
    pair_index = np.concatenate([np.arange(n, 2 * n), np.arange(n)])
    return PerturbationBatch(directions, scheme, pair_index)


def sample_iid(stream: RngStream, n: int, d: int) -> PerturbationBatch:
    """n independent standard Gaussian directions."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    return PerturbationBatch(stream.standard_normal((n, d)), Scheme.IID)


def sample_antithetic(stream: RngStream, n_pairs: int, d: int) -> PerturbationBatch:
    """n_pairs Gaussian directions plus their exact negations."""
    if n_pairs < 1 or d < 1:
        raise ValueError("n_pairs and d must be positive")
    return _paired(stream.standard_normal((n_pairs, d)), Scheme.ANTITHETIC)


def sample_orthogonal(stream: RngStream, n: int, d: int, antithetic: bool = False) -> PerturbationBatch:
    """n mutually orthogonal directions with exact Gaussian marginals.

    The orthonormal frame comes from Gram-Schmidt on raw Gaussians; each
    row's norm is then redrawn through the chi quantile so marginals stay
    N(0, I_d). Requires n <= d.
    """
    if not 1 <= n <= d:
        raise ValueError(f"orthogonal sampling needs 1 <= n <= d, got n={n}, d={d}")
    for _ in range(64):
        try:
            frame = gram_schmidt_orthogonalize(stream.standard_normal((n, d)))
            break
        except RankDeficientError:
            continue
    else:
        raise RankDeficientError("could not draw an independent Gaussian frame")
    u = np.clip(stream.uniform(n), 1e-16, 1.0 - 1e-16)
    norms = np.atleast_1d(chi_norm_quantile(u, d))
    directions = frame * norms[:, None]
    if antithetic:
        return _paired(directions, Scheme.ORTHO)
    return PerturbationBatch(directions, Scheme.ORTHO)


def sample_gcmc(stream: RngStream, n_pairs: int, d: int) -> PerturbationBatch:
    """Antiparallel pairs whose norms are coupled through the chi CDF.

    For each pair, F_R(||eps||) + F_R(||eps'||) = 1, the optimal coupling of
    norms for antithetic directions.
    """
    if n_pairs < 1 or d < 1:
        raise ValueError("n_pairs and d must be positive")
    eps = stream.standard_normal((n_pairs, d))
    norms = np.linalg.norm(eps, axis=1)
    while np.any(norms == 0.0):
        redraw = norms == 0.0
        eps[redraw] = stream.standard_normal((int(redraw.sum()), d))
        norms = np.linalg.norm(eps, axis=1)
    u = np.clip(1.0 - chi_norm_cdf(norms, d), 1e-12, 1.0 - 1e-12)
    partner_norms = np.atleast_1d(chi_norm_quantile(u, d))
    partners = -(eps / norms[:, None]) * partner_norms[:, None]
    directions = np.concatenate([eps, partners], axis=0)
    pair_index = np.concatenate([np.arange(n_pairs, 2 * n_pairs), np.arange(n_pairs)])
    return PerturbationBatch(directions, Scheme.GCMC, pair_index)


def sample_qmc(sequence_cursor: int, n: int, d: int, antithetic: bool = False):
    """Halton points pushed through the normal inverse CDF.

    Returns (batch, new cursor); the cursor advances so successive calls use
    fresh sequence segments instead of replaying the same points.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    if sequence_cursor < 0:
        raise ValueError("cursor must be non-negative")
    points = halton_sequence(n, d, skip=sequence_cursor)
    directions = inverse_normal_cdf(points)
    if antithetic:
        return _paired(directions, Scheme.QMC), sequence_cursor + n
    return PerturbationBatch(directions, Scheme.QMC), sequence_cursor + n
