"""Exact-enumeration convergence diagnostics.

Everything in this module works on a finite box of coefficient vectors with
the target renormalized over the box, so the finite chain's stationary law is
exactly the box-restricted Gaussian and the kernel matrices are exact (scan
indices and block choices are averaged analytically, never sampled). There is
no randomness anywhere in this module.
"""

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (NotConverged, NotReversible, NotStationary,
                     PermutationSpaceTooLarge, StateSpaceTooLarge,
                     NotErgodicWarning)

STATE_CAP = 10 ** 6
MIXING_STEP_CAP = 10 ** 6
MWG_DEGENERATE_EPS = 1e-300


@dataclass(frozen=True)
class Box:
    """Per-dimension inclusive integer bounds."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.int64)
        hi = np.asarray(self.hi, dtype=np.int64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box bounds must be 1-D arrays of equal length")
        if np.any(lo > hi):
            raise ValueError("box has an empty dimension")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, n, radius, center=None):
        c = np.zeros(n, dtype=np.int64) if center is None else np.asarray(center, dtype=np.int64)
        r = int(radius)
        return cls(c - r, c + r)

    @property
    def n(self):
        return self.lo.shape[0]

    def dims(self):
        return tuple(int(h - l + 1) for l, h in zip(self.lo, self.hi))

    def count(self):
        return int(np.prod([float(d) for d in self.dims()]))

    def states(self):
        """All states, row-major in the per-dimension ranges, shape (K, n)."""
        ranges = [np.arange(l, h + 1, dtype=np.int64) for l, h in zip(self.lo, self.hi)]
        grid = np.meshgrid(*ranges, indexing="ij")
        return np.stack(grid, axis=-1).reshape(-1, self.n)


def default_box(basis, params, min_radius=3, sigma_mult=4.0):
    """Box around the real solve of B x = c, radius ~ sigma over the level norms."""
    center = np.linalg.solve(basis.b_matrix, params.center)
    mid = np.round(center).astype(np.int64)
    radius = np.ceil(sigma_mult * params.sigma / basis.gs_norms).astype(np.int64)
    radius = np.maximum(radius, min_radius)
    return Box(mid - radius, mid + radius)


@dataclass(frozen=True)
class PmfTable:
    """Finite distribution over integer vectors (or scalars)."""

    support: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support)
        probs = np.asarray(self.probs, dtype=np.float64)
        if len(support) != len(probs):
            raise ValueError("support/probs length mismatch")
        if np.any(probs < 0.0):
            raise ValueError("probabilities must be non-negative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
        keys = [self._key(row) for row in support]
        if len(set(keys)) != len(keys):
            raise ValueError("support has duplicate entries")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "_index", dict(zip(keys, range(len(keys)))))

    @staticmethod
    def _key(row):
        a = np.asarray(row)
        return int(a) if a.ndim == 0 else tuple(int(v) for v in a)

    def prob(self, key):
        i = self._index.get(self._key(key))
        return 0.0 if i is None else float(self.probs[i])

    def index_of(self, key):
        return self._index[self._key(key)]

    def as_dict(self):
        return {self._key(row): float(p) for row, p in zip(self.support, self.probs)}


@dataclass(frozen=True)
class KernelMatrix:
    """Row-stochastic transition matrix over an ordered finite state space."""

    states: np.ndarray
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != len(self.states):
            raise ValueError("matrix must be square and aligned with states")
        if np.any(m < 0.0):
            raise ValueError("negative transition probability")
        rows = m.sum(axis=1)
        if np.max(np.abs(rows - 1.0)) > 1e-12:
            raise ValueError("rows must sum to 1")
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class SpectralReport:
    rho: float
    gap: float
    eigen_residual: float


def _box_energies(basis, params, box):
    states = box.states()
    points = states.astype(np.float64) @ basis.b_matrix.T
    diff = points - params.center
    return states, -np.sum(diff * diff, axis=1) / (2.0 * params.sigma ** 2)


def enumerate_target(basis, params, box, cap=STATE_CAP):
    """Box-restricted target as a PmfTable (log-sum-exp normalization)."""
    if box.count() > cap:
        raise StateSpaceTooLarge(f"{box.count()} states exceeds cap {cap}")
    states, logw = _box_energies(basis, params, box)
    m = logw.max()
    w = np.exp(logw - m)
    return PmfTable(states, w / w.sum())


def _site_conditionals(logw, dims, axes):
    """Conditional probabilities of the block `axes` given the rest.

    Returns an array shaped like dims: entry = P(x_axes | x_rest)."""
    e = logw.reshape(dims)
    m = e.max(axis=axes, keepdims=True)
    w = np.exp(e - m)
    return w / w.sum(axis=axes, keepdims=True)


def _resample_kernel(cond, dims, axes):
    """Dense kernel that redraws the block `axes` from its conditional."""
    k = int(np.prod(dims))
    order = [a for a in range(len(dims)) if a not in axes] + list(axes)
    block = int(np.prod([dims[a] for a in axes]))
    idx = np.arange(k).reshape(dims).transpose(order).reshape(-1, block)
    c = cond.transpose(order).reshape(-1, block)
    p = np.zeros((k, k))
    p[idx[:, :, None], idx[:, None, :]] = c[:, None, :]
    return p


def _mwg_line_kernel(c):
    """Single-site MWG kernel on one line with conditional probabilities c.

    Off-diagonal entries are min{c_b/(1-c_a), c_b/(1-c_b)}: proposal mass with
    the current value removed times the acceptance ratio. A site whose
    conditional concentrates on the current value is a self-loop.
    """
    L = c.shape[0]
    p = np.zeros((L, L))
    for a in range(L):
        if 1.0 - c[a] < MWG_DEGENERATE_EPS:
            p[a, a] = 1.0
            continue
        row = np.minimum(c / (1.0 - c[a]), c / np.maximum(1.0 - c, 1e-300))
        row[a] = 0.0
        p[a] = row
        p[a, a] = max(0.0, 1.0 - row.sum())
    return p


def build_kernel(kind, basis, params, box, m=None, scan_probs=None, cap=STATE_CAP):
    """Exact transition matrix of a sampler kind on the boxed target.

    kind: "gibbs", "mwg", or "gk" (block size m). Scan indices, and for "gk"
    the random block choice, are averaged analytically.
    """
    if box.count() > cap:
        raise StateSpaceTooLarge(f"{box.count()} states exceeds cap {cap}")
    states, logw = _box_energies(basis, params, box)
    dims = box.dims()
    n = box.n
    k = len(states)
    p = np.zeros((k, k))
    if kind in ("gibbs", "mwg"):
        beta = np.full(n, 1.0 / n) if scan_probs is None else np.asarray(scan_probs, dtype=np.float64)
        for i in range(n):
            cond = _site_conditionals(logw, dims, (i,))
            if kind == "gibbs":
                p += beta[i] * _resample_kernel(cond, dims, (i,))
            else:
                order = [a for a in range(n) if a != i] + [i]
                idx = np.arange(k).reshape(dims).transpose(order).reshape(-1, dims[i])
                cl = cond.transpose(order).reshape(-1, dims[i])
                pi_site = np.zeros((k, k))
                for line, cline in zip(idx, cl):
                    pi_site[np.ix_(line, line)] = _mwg_line_kernel(cline)
                p += beta[i] * pi_site
    elif kind == "gk":
        if m is None or not 1 <= m <= n:
            raise ValueError("gk kernel needs a block size 1 <= m <= n")
        if n > 5:
            raise PermutationSpaceTooLarge("analytic block averaging limited to n <= 5")
        subsets = list(itertools.combinations(range(n), m))
        for axes in subsets:
            cond = _site_conditionals(logw, dims, axes)
            p += _resample_kernel(cond, dims, axes) / len(subsets)
    else:
        raise ValueError(f"unknown kernel kind {kind!r}")
    return KernelMatrix(states, p)


def tv_distance(a, b):
    """Total variation distance; supports aligned by key, missing keys are 0."""
    da, db = a.as_dict(), b.as_dict()
    keys = set(da) | set(db)
    return 0.5 * sum(abs(da.get(key, 0.0) - db.get(key, 0.0)) for key in keys)


def check_stationary(kernel, target, tol=1e-10):
    pi = target.probs
    resid = float(np.max(np.abs(pi @ kernel.matrix - pi)))
    if resid > tol:
        raise NotStationary(f"stationarity residual {resid:.3e} exceeds {tol:.1e}")
    return resid


def check_reversible(kernel, target, tol=1e-10):
    flow = target.probs[:, None] * kernel.matrix
    resid = float(np.max(np.abs(flow - flow.T)))
    if resid > tol:
        raise NotReversible(f"detailed-balance residual {resid:.3e} exceeds {tol:.1e}")
    return resid


def spectral_radius_forward(kernel, target):
    """Convergence rate of the chain: operator norm of the one-step
    conditional-expectation operator on mean-zero functions.

    For a reversible kernel this is the second-largest eigenvalue modulus of
    the pi-symmetrized matrix, computed here as sqrt(P o P^T) which avoids
    dividing by tiny stationary probabilities.
    """
    check_stationary(kernel, target)
    check_reversible(kernel, target)
    a = np.sqrt(kernel.matrix * kernel.matrix.T)
    a = 0.5 * (a + a.T)
    vals, vecs = np.linalg.eigh(a)
    top = int(np.argmax(vals))
    others = [i for i in range(len(vals)) if i != top]
    sub = int(others[np.argmax(np.abs(vals[others]))]) if others else top
    rho = min(float(abs(vals[sub])), 1.0) if others else 0.0
    resid = float(np.max(np.abs(a @ vecs[:, sub] - vals[sub] * vecs[:, sub]))) if others else 0.0
    if rho >= 1.0 - 1e-12:
        warnings.warn("spectral radius is 1: chain is not ergodic on this box",
                      NotErgodicWarning)
    return SpectralReport(rho=rho, gap=1.0 - rho, eigen_residual=resid)


@dataclass(frozen=True)
class DecayCurve:
    ts: np.ndarray
    tvs: np.ndarray
    tail_slope: float

    def rows(self):
        return list(zip(self.ts.tolist(), self.tvs.tolist()))


def tv_decay_curve(kernel, target, x0, t_max):
    """TV(P^t(x0, .), pi) for t = 0..t_max plus the tail slope of log TV."""
    if t_max > 10 ** 4:
        raise ValueError("t_max capped at 1e4")
    pi = target.probs
    v = np.zeros_like(pi)
    v[target.index_of(x0)] = 1.0
    tvs = np.empty(t_max + 1)
    for t in range(t_max + 1):
        tvs[t] = 0.5 * np.abs(v - pi).sum()
        if t < t_max:
            v = v @ kernel.matrix
    ts = np.arange(t_max + 1)
    valid = tvs > 1e-13
    fit_ts = ts[valid]
    fit_tvs = tvs[valid]
    if len(fit_ts) >= 4:
        half = len(fit_ts) // 2
        slope = float(np.polyfit(fit_ts[half:], np.log(fit_tvs[half:]), 1)[0])
    else:
        slope = math.nan
    return DecayCurve(ts=ts, tvs=tvs, tail_slope=slope)


def _worst_tv(power, pi):
    return float(0.5 * np.abs(power - pi).sum(axis=1).max())


def estimate_mixing(kernel, target, epsilon):
    """Smallest t with worst-case-over-states TV at most epsilon.

    Worst-case TV is non-increasing in t, so doubling followed by bisection
    is exact. Raises NotConverged past 1e6 steps.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    pi = target.probs
    p = kernel.matrix

    def power(t):
        result = np.eye(len(pi))
        base = p.copy()
        while t:
            if t & 1:
                result = result @ base
            t >>= 1
            if t:
                base = base @ base
        return result

    t = 1
    cur = p.copy()
    while _worst_tv(cur, pi) > epsilon:
        t *= 2
        if t > MIXING_STEP_CAP:
            raise NotConverged(f"mixing time exceeds {MIXING_STEP_CAP}")
        cur = cur @ cur
    lo, hi = t // 2, t
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _worst_tv(power(mid), pi) <= epsilon:
            hi = mid
        else:
            lo = mid
    return hi


def spectral_record(kind, basis, params, box, report):
    """Plot-ready JSON record for one spectral report."""
    return {
        "kind": kind,
        "n": basis.n,
        "sigma": params.sigma,
        "box": [[int(l), int(h)] for l, h in zip(box.lo, box.hi)],
        "rho": report.rho,
        "gap": report.gap,
    }


def write_decay_csv(path, curve):
    with open(path, "w") as fh:
        fh.write("t,tv\n")
        for t, tv in curve.rows():
            fh.write(f"{t},{tv:.12g}\n")
