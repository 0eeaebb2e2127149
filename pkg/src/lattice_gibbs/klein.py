"""Klein's randomized nearest-plane sampler and its closed-form pmf.

One draw walks the QR levels backward (n down to 1), sampling each coordinate
from a 1-D integer Gaussian whose center depends on the levels already fixed.
The product of the per-level probabilities is the exact law of the draw under
the truncated-support convention, and coincides with the lattice Gaussian
itself when the basis is orthogonal.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import TAIL_FACTOR
from .errors import DimensionMismatch


@dataclass(frozen=True)
class KleinSample:
    coeffs: np.ndarray
    log_prob: float


def _window(sigma_i, center, tail):
    # collapses to the nearest integer when the tail window straddles no integer
    lo = math.ceil(center - tail * sigma_i)
    hi = math.floor(center + tail * sigma_i)
    if lo > hi:
        lo = hi = math.floor(center + 0.5)
    return lo, hi


def _window_logpmf(sigma_i, center, lo, hi, k):
    if k < lo or k > hi:
        return -math.inf
    inv = 1.0 / (2.0 * sigma_i * sigma_i)
    ks = np.arange(lo, hi + 1, dtype=np.float64)
    e = -((ks - center) ** 2) * inv
    emax = e.max()
    return float(e[int(k) - lo] - emax - math.log(np.exp(e - emax).sum()))


def _level_center(r, cprime, x, i):
    """Conditional center at level i given coordinates above i."""
    n = r.shape[0]
    acc = cprime[i]
    for j in range(i + 1, n):
        acc -= r[i, j] * x[j]
    return acc / r[i, i]


def klein_sample(basis, params, rng, tail_factor=TAIL_FACTOR):
    """One draw, returned with its own log probability."""
    n = basis.n
    r = basis.r_matrix
    cprime = params.rotated_center(basis)
    stream = _kernels.as_stream(rng)
    x = np.zeros(n, dtype=np.int64)
    log_prob = 0.0
    for i in range(n - 1, -1, -1):
        sigma_i = params.sigma / r[i, i]
        center = _level_center(r, cprime, x, i)
        lo, hi = _window(sigma_i, center, tail_factor)
        x[i] = _kernels.active.dgauss_draw(sigma_i, center, lo, hi, stream.next())
        log_prob += _window_logpmf(sigma_i, center, lo, hi, int(x[i]))
    return KleinSample(coeffs=x, log_prob=log_prob)


def klein_log_pmf(basis, params, x, tail_factor=TAIL_FACTOR):
    """Log probability the backward pass assigns to x; -inf outside the support tree."""
    x = np.asarray(x, dtype=np.int64)
    if x.shape != (basis.n,):
        raise DimensionMismatch(f"expected coefficient vector of length {basis.n}")
    r = basis.r_matrix
    cprime = params.rotated_center(basis)
    log_prob = 0.0
    for i in range(basis.n - 1, -1, -1):
        sigma_i = params.sigma / r[i, i]
        center = _level_center(r, cprime, x, i)
        lo, hi = _window(sigma_i, center, tail_factor)
        lp = _window_logpmf(sigma_i, center, lo, hi, int(x[i]))
        if lp == -math.inf:
            return -math.inf
        log_prob += lp
    return log_prob


def klein_pmf(basis, params, x, tail_factor=TAIL_FACTOR):
    lp = klein_log_pmf(basis, params, x, tail_factor)
    return 0.0 if lp == -math.inf else math.exp(lp)
