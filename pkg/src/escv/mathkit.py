"""Deterministic numeric primitives shared by the samplers and estimators.

Special functions (normal inverse CDF, chi norm CDF/quantile), Halton
low-discrepancy points, Gram-Schmidt orthogonalization, and the centered
rank transform. All functions are pure.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special as _special


class RankDeficientError(RuntimeError):
    """Gram-Schmidt hit a (numerically) dependent input; caller should resample."""


def inverse_normal_cdf(p):
    """Quantile of the standard normal, Phi^{-1}(p). Accepts scalars or arrays.

    Raises ValueError outside the open interval (0, 1).
    """
    arr = np.asarray(p, dtype=float)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise ValueError("inverse_normal_cdf requires 0 < p < 1")
    out = _special.ndtri(arr)
    return float(out) if np.isscalar(p) or arr.ndim == 0 else out


def chi_norm_cdf(r, d: int):
    """P(||Z|| <= r) for Z ~ N(0, I_d): regularized lower incomplete gamma P(d/2, r^2/2)."""
    if d < 1:
        raise ValueError("dimension must be positive")
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("norm must be non-negative")
    out = _special.gammainc(d / 2.0, arr * arr / 2.0)
    return float(out) if np.isscalar(r) or arr.ndim == 0 else out


def chi_norm_quantile(p, d: int):
    """Inverse of chi_norm_cdf by bracketed bisection. Accepts scalars or arrays.

    p must lie in [0, 1); p = 1 has no finite quantile.
    """
    if d < 1:
        raise ValueError("dimension must be positive")
    arr = np.atleast_1d(np.asarray(p, dtype=float))
    if np.any(arr < 0.0) or np.any(arr >= 1.0):
        raise ValueError("chi_norm_quantile requires 0 <= p < 1")
    lo = np.zeros_like(arr)
    hi_val = 100.0
    pmax = float(arr.max(initial=0.0))
    while chi_norm_cdf(hi_val, d) <= pmax and hi_val < 1e12:
        hi_val *= 2.0
    hi = np.full_like(arr, hi_val)
    for _ in range(120):
        mid = 0.5 * (lo + hi)
        below = chi_norm_cdf(mid, d) < arr
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = 0.5 * (lo + hi)
    out[arr == 0.0] = 0.0
    return float(out[0]) if np.isscalar(p) or np.asarray(p).ndim == 0 else out


def first_primes(k: int) -> np.ndarray:
    """The first k primes (k <= 1000)."""
    if k > 1000:
        raise ValueError("at most 1000 prime bases are supported")
    # the 1000th prime is 7919
    limit = 7920
    sieve = np.ones(limit, dtype=bool)
    sieve[:2] = False
    for i in range(2, int(limit**0.5) + 1):
        if sieve[i]:
            sieve[i * i :: i] = False
    return np.flatnonzero(sieve)[:k]


def _radical_inverse(index: int, base: int) -> float:
    inv = 0.0
    f = 1.0 / base
    n = index
    while n > 0:
        inv += (n % base) * f
        n //= base
        f /= base
    return inv


def halton_sequence(count: int, dim: int, skip: int = 0) -> np.ndarray:
    """(count, dim) Halton points; coordinate j uses the j-th prime base.

    Point i encodes index skip + i + 1, so coordinates never hit 0 or 1.
    """
    if count < 1 or dim < 1:
        raise ValueError("count and dim must be positive")
    if skip < 0:
        raise ValueError("skip must be non-negative")
    bases = first_primes(dim)
    out = np.empty((count, dim))
    for j, base in enumerate(bases):
        b = int(base)
        for i in range(count):
            out[i, j] = _radical_inverse(skip + i + 1, b)
    return out


def gram_schmidt_orthogonalize(vectors: np.ndarray) -> np.ndarray:
    """Orthonormalize the rows of an (n, d) array, n <= d.

    Runs modified Gram-Schmidt twice so pairwise dot products stay below
    1e-10 even for ill-conditioned inputs. Raises RankDeficientError when a
    pivot norm falls under 1e-12, signalling the caller to resample.
    """
    v = np.array(vectors, dtype=float)
    if v.ndim != 2:
        raise ValueError("expected a 2-D array of row vectors")
    n, d = v.shape
    if n > d:
        raise ValueError(f"cannot orthogonalize {n} vectors in dimension {d}")
    for i in range(n):
        for _ in range(2):
            for j in range(i):
                v[i] -= (v[j] @ v[i]) * v[j]
        norm = math.sqrt(v[i] @ v[i])
        if norm < 1e-12:
            raise RankDeficientError(f"pivot {i} is numerically dependent")
        v[i] /= norm
    return v


def centered_rank_transform(values: np.ndarray) -> np.ndarray:
    """Map values to centered ranks in [-0.5, 0.5].

    The value of ascending rank k (0-based, ties broken by input index)
    becomes k/(n-1) - 0.5.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if n < 2:
        raise ValueError("need at least two values to rank")
    order = np.argsort(values, kind="stable")
    ranks = np.empty(n)
    ranks[order] = np.arange(n, dtype=float)
    return ranks / (n - 1) - 0.5
