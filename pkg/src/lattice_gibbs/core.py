"""Lattice bases, Gaussian parameters and the shared 1-D sampling primitives.

Everything here is immutable after construction and safe for concurrent use;
random streams are owned by exactly one caller at a time.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionMismatch, RankDeficient

TAIL_FACTOR = 12.0
THETA_REL_TOL = 1e-15

#: Reference bases pinned in code so tests and the CLI need no external files.
BUILTIN_BASES = {
    "1d": ((1.0,),),
    "2d": ((1.0, 0.5), (0.0, 1.1)),
    "3d": ((1.0, 0.5, 0.25), (0.0, 1.1, 0.55), (0.0, 0.0, 1.2)),
}


def _frozen(a):
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LatticeBasis:
    """Full-rank real basis with its cached orthogonalization B = Q R."""

    b_matrix: np.ndarray
    q_matrix: np.ndarray
    r_matrix: np.ndarray
    gs_norms: np.ndarray

    @property
    def n(self):
        return self.b_matrix.shape[0]

    def columns(self):
        """Basis columns as a C-contiguous (n, n) array, row i = b_i."""
        return np.ascontiguousarray(self.b_matrix.T)

    def column_norms_sq(self):
        return np.sum(self.b_matrix ** 2, axis=0)


def build_basis(columns):
    """QR-factor a square matrix into a LatticeBasis.

    The diagonal of R is forced positive; the compensating sign flips are
    absorbed into Q. Raises RankDeficient when any r_ii falls below
    1e-10 times the largest column norm.
    """
    b = np.asarray(columns, dtype=np.float64)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise DimensionMismatch(f"basis must be square, got shape {b.shape}")
    if not np.all(np.isfinite(b)):
        raise ValueError("basis entries must be finite")
    q, r = np.linalg.qr(b)
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    q = q * signs
    r = signs[:, None] * r
    max_col = float(np.max(np.sqrt(np.sum(b ** 2, axis=0))))
    diag = np.diag(r).copy()
    if np.any(diag < 1e-10 * max_col):
        raise RankDeficient("basis is numerically rank deficient")
    return LatticeBasis(_frozen(b.copy()), _frozen(q), _frozen(r), _frozen(diag))


def read_basis_file(path):
    """Parse a plain-text basis: one row per line, whitespace-separated."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(tok) for tok in line.split()])
    if not rows:
        raise ValueError(f"no rows in basis file {path!r}")
    return build_basis(np.array(rows, dtype=np.float64))


def builtin_basis(name):
    try:
        return build_basis(np.array(BUILTIN_BASES[name], dtype=np.float64))
    except KeyError:
        raise KeyError(f"unknown builtin basis {name!r}; have {sorted(BUILTIN_BASES)}") from None


@dataclass(frozen=True)
class GaussianParams:
    """Standard deviation and center of the target on the lattice."""

    sigma: float
    center: np.ndarray

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        object.__setattr__(self, "center",
                           _frozen(np.asarray(self.center, dtype=np.float64).copy()))

    def rotated_center(self, basis):
        """Center expressed in the orthogonalized frame, Q^T c."""
        if self.center.shape[0] != basis.n:
            raise DimensionMismatch("center length does not match basis")
        return basis.q_matrix.T @ self.center


def density_exponent(basis, params, x):
    """Log of the unnormalized lattice Gaussian mass, -||Bx - c||^2 / (2 sigma^2)."""
    x = np.asarray(x)
    if x.shape != (basis.n,):
        raise DimensionMismatch(f"expected coefficient vector of length {basis.n}")
    diff = basis.b_matrix @ x.astype(np.float64) - params.center
    return float(-(diff @ diff) / (2.0 * params.sigma ** 2))


@dataclass(frozen=True)
class Dgauss1dSpec:
    """Parameters of a 1-D integer Gaussian truncated at tail_factor sigmas."""

    sigma_i: float
    center_i: float
    tail_factor: float = TAIL_FACTOR

    def __post_init__(self):
        if not self.sigma_i > 0.0:
            raise ValueError(f"sigma_i must be positive, got {self.sigma_i}")
        if not self.tail_factor > 0.0:
            raise ValueError(f"tail_factor must be positive, got {self.tail_factor}")
        lo, hi = self.support()
        if lo > hi:
            raise ValueError(
                f"truncated support is empty: sigma_i={self.sigma_i}, "
                f"center_i={self.center_i}, tail_factor={self.tail_factor}")

    def support(self):
        half = self.tail_factor * self.sigma_i
        return (math.ceil(self.center_i - half), math.floor(self.center_i + half))


def dgauss_1d_table(spec):
    """Support bounds and normalized probabilities of the truncated 1-D Gaussian."""
    lo, hi = spec.support()
    ks = np.arange(lo, hi + 1, dtype=np.float64)
    e = -((ks - spec.center_i) ** 2) / (2.0 * spec.sigma_i ** 2)
    w = np.exp(e - e.max())
    return lo, hi, w / w.sum()


def dgauss_1d_pmf(spec, k):
    lo, hi, probs = dgauss_1d_table(spec)
    if k < lo or k > hi:
        return 0.0
    return float(probs[int(k) - lo])


def dgauss_1d_logpmf(spec, k):
    lo, hi = spec.support()
    if k < lo or k > hi:
        return -math.inf
    inv = 1.0 / (2.0 * spec.sigma_i ** 2)
    ks = np.arange(lo, hi + 1, dtype=np.float64)
    e = -((ks - spec.center_i) ** 2) * inv
    emax = e.max()
    return float(e[int(k) - lo] - emax - math.log(np.exp(e - emax).sum()))


def sample_dgauss_1d(spec, rng):
    """Exact inverse-CDF draw over the truncated support."""
    lo, hi = spec.support()
    u = rng.next() if isinstance(rng, _kernels.UniformStream) else float(rng.random())
    return int(_kernels.active.dgauss_draw(spec.sigma_i, spec.center_i, lo, hi, u))


def sample_dgauss_1d_many(spec, size, rng):
    lo, hi = spec.support()
    us = rng.random(size)
    return _kernels.active.dgauss_draw_many(spec.sigma_i, spec.center_i, lo, hi, us)


def theta_sum(sigma, spacing, offset, rel_tol=THETA_REL_TOL):
    """Total Gaussian mass of the shifted 1-D lattice spacing*Z + offset.

    Summed symmetrically outward from the minimizing point until the next
    term drops below rel_tol times the running sum.
    """
    if not sigma > 0.0:
        raise ValueError("sigma must be positive")
    if not spacing > 0.0:
        raise ValueError("spacing must be positive")
    if not 0.0 < rel_tol <= 1e-6:
        raise ValueError("rel_tol must lie in (0, 1e-6]")
    return float(_kernels.active.theta_sum(float(sigma), float(spacing),
                                           float(offset), float(rel_tol)))
