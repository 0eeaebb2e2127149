"""Blocked sampling: joint redraws of m coordinates per step.

Each step applies a fresh uniformly random permutation, runs a backward
1-D pass over the first m permuted levels, and corrects the draw by rejection
so the accepted block is distributed exactly as the conditional lattice
Gaussian of the block given the rest. The acceptance probability is a ratio
of shifted to centered 1-D Gaussian lattice masses, one factor per level.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import (TAIL_FACTOR, THETA_REL_TOL, LatticeBasis, build_basis,
                   theta_sum)
from .diagnostics import PmfTable
from .errors import DimensionMismatch, RetryCapExceeded
from .klein import _window, _window_logpmf
from .univariate import ChainRun, ChainState, make_state

QR_CACHE_CAP = 50000


@dataclass(frozen=True)
class BlockPlan:
    """A permutation together with the factorization of the permuted basis."""

    permutation: tuple
    block_size: int
    permuted_basis: LatticeBasis
    rotated_center: np.ndarray


@dataclass(frozen=True)
class BlockDraw:
    """An accepted block with its acceptance bookkeeping."""

    z_block: np.ndarray
    xi_offsets: np.ndarray
    accept_prob: float
    retries: int


def draw_permutation(n, stream):
    """Uniform permutation via Fisher-Yates on the shared uniform stream."""
    perm = list(range(n))
    for i in range(n - 1, 0, -1):
        j = int(stream.next() * (i + 1))
        if j > i:
            j = i
        perm[i], perm[j] = perm[j], perm[i]
    return tuple(perm)


def make_block_plan(basis, params, block_size, perm, cache=None):
    if not 1 <= block_size <= basis.n:
        raise ValueError(f"block size must lie in [1, {basis.n}]")
    cached = cache.get(perm) if cache is not None else None
    if cached is None:
        permuted = build_basis(basis.b_matrix[:, list(perm)])
        if cache is not None and len(cache) < QR_CACHE_CAP:
            cache[perm] = permuted
    else:
        permuted = cached
    return BlockPlan(permutation=perm, block_size=block_size,
                     permuted_basis=permuted,
                     rotated_center=permuted.q_matrix.T @ params.center)


def _permuted_alphabet(alphabet, perm, n):
    if alphabet is None:
        z = np.zeros(n, dtype=np.int64)
        return np.zeros(n, dtype=np.int8), z, z
    if not alphabet.kernel_compatible():
        raise ValueError("explicit candidate lists are not supported by the "
                         "blocked sampler; use interval alphabets")
    idx = list(perm)
    return alphabet.modes[idx], alphabet.lo[idx], alphabet.hi[idx]


def block_denominators(plan, params, rel_tol=THETA_REL_TOL):
    """Centered lattice-mass normalizers, one per block level."""
    r = plan.permuted_basis.r_matrix
    return np.array([theta_sum(params.sigma, r[i, i], 0.0, rel_tol)
                     for i in range(plan.block_size)])


ENUM_PATH_CAP = 4096


def _enumerated_block_draw(r, cprime, z, m, sigma, lo, hi, stream):
    """Exact restricted-conditional block draw for interval alphabets.

    With every block level restricted to a finite interval the conditional is
    computable outright, so the block is drawn from it directly instead of by
    rejection (whose acceptance collapses when sigma sits far below the
    validity threshold). Consumes one uniform; mutates z[:m]."""
    n = len(z)
    ranges = [np.arange(int(lo[lev]), int(hi[lev]) + 1, dtype=np.int64)
              for lev in range(m)]
    grid = np.meshgrid(*ranges, indexing="ij")
    paths = np.stack(grid, axis=-1).reshape(-1, m)
    cbar = cprime[:m] - r[:m, m:] @ np.asarray(z[m:], dtype=np.float64)
    resid = cbar[None, :] - paths.astype(np.float64) @ r[:m, :m].T
    e = np.sum(resid * resid, axis=1) / (2.0 * sigma * sigma)
    w = np.exp(e.min() - e)
    cum = np.cumsum(w)
    u = stream.next()
    idx = int(np.searchsorted(cum, u * cum[-1], side="left"))
    idx = min(idx, len(paths) - 1)
    z[:m] = paths[idx]
    xi = np.empty(m)
    for lev in range(m - 1, -1, -1):
        acc = cprime[lev] - float(r[lev, lev + 1:] @ np.asarray(z[lev + 1:], dtype=np.float64))
        xi[lev] = -(acc / r[lev, lev]) * r[lev, lev]
    return BlockDraw(z_block=np.array(z[:m]), xi_offsets=xi, accept_prob=1.0,
                     retries=0)


def draw_block(plan, params, z, stream, retry_cap=100, alphabet=None,
               tail_factor=TAIL_FACTOR, rel_tol=THETA_REL_TOL, denoms=None):
    """Produce one exact conditional block draw.

    z is the full permuted coefficient vector; entries block_size..n-1
    condition the draw and entries 0..block_size-1 receive the result.
    Unrestricted levels go through the backward pass with rejection; when
    every block level is a small finite interval the restricted conditional
    is drawn directly instead (same law, no retries).
    """
    m = plan.block_size
    mode, lo, hi = _permuted_alphabet(alphabet, plan.permutation, len(z))
    if np.all(mode[:m] == 1):
        count = int(np.prod((hi[:m] - lo[:m] + 1).astype(np.float64)))
        if count <= ENUM_PATH_CAP:
            return _enumerated_block_draw(plan.permuted_basis.r_matrix,
                                          plan.rotated_center, z, m,
                                          params.sigma, lo, hi, stream)
    if denoms is None:
        denoms = block_denominators(plan, params, rel_tol)
    status, xi, alpha, rejections = _kernels.active.gk_block_draw(
        plan.permuted_basis.r_matrix, plan.rotated_center, z, m,
        params.sigma, tail_factor, int(retry_cap), rel_tol,
        mode, lo, hi, denoms, stream)
    if status != 0:
        raise RetryCapExceeded(
            f"no block accepted after {rejections} rejections "
            f"(sigma={params.sigma} is far below the validity threshold)")
    return BlockDraw(z_block=z[:m].copy(), xi_offsets=xi,
                     accept_prob=float(alpha), retries=int(rejections))


def gk_step(state, basis, params, block_size, rng, retry_cap=100,
            alphabet=None, tail_factor=TAIL_FACTOR, rel_tol=THETA_REL_TOL,
            cache=None):
    """One blocked move; returns the new ChainState."""
    new_state, _ = gk_step_draw(state, basis, params, block_size, rng,
                                retry_cap, alphabet, tail_factor, rel_tol, cache)
    return new_state


def gk_step_draw(state, basis, params, block_size, rng, retry_cap=100,
                 alphabet=None, tail_factor=TAIL_FACTOR,
                 rel_tol=THETA_REL_TOL, cache=None):
    """One blocked move; returns (ChainState, BlockDraw)."""
    stream = _kernels.as_stream(rng)
    perm = draw_permutation(basis.n, stream)
    plan = make_block_plan(basis, params, block_size, perm, cache)
    z = state.coeffs[list(perm)].copy()
    draw = draw_block(plan, params, z, stream, retry_cap, alphabet,
                      tail_factor, rel_tol)
    coeffs = np.array(state.coeffs)
    coeffs[list(perm)] = z
    return make_state(basis, params, coeffs), draw


class GkSampler:
    """Blocked kernel with a persistent permutation-keyed factorization cache."""

    kind = "gk"

    def __init__(self, basis, params, block_size, retry_cap=100, alphabet=None,
                 tail_factor=TAIL_FACTOR, rel_tol=THETA_REL_TOL):
        if not 1 <= block_size <= basis.n:
            raise ValueError(f"block size must lie in [1, {basis.n}]")
        self.basis = basis
        self.params = params
        self.block_size = block_size
        self.retry_cap = retry_cap
        self.alphabet = alphabet
        self.tail_factor = tail_factor
        self.rel_tol = rel_tol
        self._cache = {}
        self._denom_cache = {}

    def initial_state(self, coeffs):
        return make_state(self.basis, self.params, coeffs)

    def step(self, state, rng):
        return gk_step(state, self.basis, self.params, self.block_size, rng,
                       self.retry_cap, self.alphabet, self.tail_factor,
                       self.rel_tol, self._cache)

    def run(self, x0, iterations, burn_in=0, thin=1, rng=None,
            checkpoint_steps=0):
        if iterations < burn_in:
            raise ValueError("iterations must be at least burn_in")
        if thin < 1:
            raise ValueError("thin must be >= 1")
        stream = _kernels.as_stream(rng)
        basis, params, m = self.basis, self.params, self.block_size
        n = basis.n
        coeffs = np.array(x0.coeffs if isinstance(x0, ChainState) else x0,
                          dtype=np.int64)
        nsamp = 0 if iterations <= burn_in else (iterations - burn_in) // thin
        samples = np.empty((nsamp, n), dtype=np.int64)
        total_retries = 0
        track = checkpoint_steps > 0
        ncp = iterations // checkpoint_steps if track else 0
        trace = np.empty(ncp)
        cp_best = np.empty((ncp, n), dtype=np.int64)

        def dist2(c):
            d = basis.b_matrix @ c.astype(np.float64) - params.center
            return float(d @ d)

        best_d2 = dist2(coeffs)
        best_x = coeffs.copy()
        wrote = 0
        for t in range(1, iterations + 1):
            perm = draw_permutation(n, stream)
            plan = make_block_plan(basis, params, m, perm, self._cache)
            denoms = self._denom_cache.get(perm)
            if denoms is None:
                denoms = block_denominators(plan, params, self.rel_tol)
                if len(self._denom_cache) < QR_CACHE_CAP:
                    self._denom_cache[perm] = denoms
            z = coeffs[list(perm)].copy()
            draw = draw_block(plan, params, z, stream, self.retry_cap,
                              self.alphabet, self.tail_factor, self.rel_tol,
                              denoms)
            total_retries += draw.retries
            coeffs[list(perm)] = z
            if track:
                d2 = dist2(coeffs)
                if d2 < best_d2:
                    best_d2 = d2
                    best_x = coeffs.copy()
            if t > burn_in and (t - burn_in) % thin == 0 and wrote < nsamp:
                samples[wrote] = coeffs
                wrote += 1
            if track and t % checkpoint_steps == 0:
                j = t // checkpoint_steps - 1
                if j < ncp:
                    trace[j] = best_d2
                    cp_best[j] = best_x

        final = make_state(basis, params, coeffs)
        run = ChainRun(samples=samples, attempts=np.array([iterations], dtype=np.int64),
                       accepts=np.array([iterations], dtype=np.int64),
                       degenerate=np.zeros(1, dtype=np.int64),
                       final_state=final, retries=total_retries)
        out = {"samples": samples, "best_x": best_x, "best_d2": best_d2,
               "trace": trace, "cp_best": cp_best, "final_x": coeffs,
               "retries": total_retries}
        return run, out


def block_accept_ratio(r_segment, xi_offsets, sigma, rel_tol=THETA_REL_TOL):
    """Product over levels of shifted-to-centered lattice-mass ratios."""
    r = np.asarray(r_segment, dtype=np.float64)
    xi = np.asarray(xi_offsets, dtype=np.float64)
    diag = np.diag(r)
    if np.any(diag <= 0.0):
        raise ValueError("r_segment diagonal must be positive")
    ratio = 1.0
    for rii, x in zip(diag, xi):
        ratio *= theta_sum(sigma, rii, x, rel_tol) / theta_sum(sigma, rii, 0.0, rel_tol)
    return min(ratio, 1.0)


def _block_box(basis, params, z_fixed, m, tail_factor):
    """Per-level enumeration bounds covering all but ~e^-tail^2/2 of the mass."""
    r = basis.r_matrix
    cp = params.rotated_center(basis)
    z_fixed = np.asarray(z_fixed, dtype=np.float64)
    cbar = cp[:m] - r[:m, m:] @ z_fixed
    z_center = np.linalg.solve(r[:m, :m], cbar)
    bounds = []
    for i in range(m):
        half = tail_factor * params.sigma / r[i, i]
        bounds.append((math.ceil(z_center[i] - half), math.floor(z_center[i] + half)))
    return bounds


def _block_states(bounds):
    ranges = [np.arange(lo, hi + 1, dtype=np.int64) for lo, hi in bounds]
    grid = np.meshgrid(*ranges, indexing="ij")
    return np.stack(grid, axis=-1).reshape(-1, len(bounds))


def block_conditional_table(basis, params, z_fixed, box=None,
                            tail_factor=TAIL_FACTOR):
    """Exact conditional of the leading block given trailing coordinates.

    basis is the (already permuted) system; z_fixed holds the trailing n-m
    coordinates. Probabilities are proportional to the joint mass, normalized
    by enumeration over the block box."""
    n = basis.n
    m = n - len(z_fixed)
    if not 1 <= m <= n:
        raise DimensionMismatch("z_fixed length must lie in [0, n-1]")
    if box is None:
        box = _block_box(basis, params, z_fixed, m, tail_factor)
    states = _block_states(box)
    z_fixed = np.asarray(z_fixed, dtype=np.int64)
    full = np.concatenate(
        [states, np.broadcast_to(z_fixed, (len(states), len(z_fixed)))], axis=1)
    pts = full.astype(np.float64) @ basis.b_matrix.T
    diff = pts - params.center
    logw = -np.sum(diff * diff, axis=1) / (2.0 * params.sigma ** 2)
    w = np.exp(logw - logw.max())
    return PmfTable(states, w / w.sum())


def block_conditional_pmf(basis, params, z_fixed, z_block, box=None,
                          tail_factor=TAIL_FACTOR):
    table = block_conditional_table(basis, params, z_fixed, box, tail_factor)
    return table.prob(tuple(int(v) for v in np.atleast_1d(z_block)))


def gk_accepted_block_table(basis, params, z_fixed, box=None,
                            tail_factor=TAIL_FACTOR, rel_tol=THETA_REL_TOL):
    """Analytic law of the accepted block: backward-pass pmf times the
    acceptance probability, renormalized. Oracle counterpart of draw_block."""
    n = basis.n
    m = n - len(z_fixed)
    if box is None:
        box = _block_box(basis, params, z_fixed, m, tail_factor)
    r = basis.r_matrix
    cp = params.rotated_center(basis)
    denom = [theta_sum(params.sigma, r[i, i], 0.0, rel_tol) for i in range(m)]
    states = _block_states(box)
    z_fixed = np.asarray(z_fixed, dtype=np.int64)
    weights = np.zeros(len(states))
    for s, zb in enumerate(states):
        z = np.concatenate([zb, z_fixed])
        logp = 0.0
        alpha = 1.0
        for lev in range(m - 1, -1, -1):
            rii = r[lev, lev]
            acc = cp[lev]
            for j in range(lev + 1, n):
                acc -= r[lev, j] * z[j]
            zt = acc / rii
            sig_i = params.sigma / rii
            alpha *= theta_sum(params.sigma, rii, rii * zt, rel_tol) / denom[lev]
            lo, hi = _window(sig_i, zt, tail_factor)
            lp = _window_logpmf(sig_i, zt, lo, hi, int(z[lev]))
            if lp == -math.inf:
                logp = -math.inf
                break
            logp += lp
        weights[s] = 0.0 if logp == -math.inf else math.exp(logp) * alpha
    total = weights.sum()
    return PmfTable(states, weights / total)


def validity_check(basis_segment, sigma, m, factor=1.0):
    """Advisory smoothing-condition gate: sigma against the level norms.

    Returns (flag, margin) with margin = sigma / threshold. The blocked
    sampler runs regardless; rejection keeps it exact, this only predicts
    the retry cost."""
    if isinstance(basis_segment, LatticeBasis):
        diag = basis_segment.gs_norms
    else:
        seg = np.asarray(basis_segment, dtype=np.float64)
        diag = np.diag(seg) if seg.ndim == 2 else seg
    if m < 1:
        raise ValueError("m must be >= 1")
    max_r = float(np.max(diag[:m]))
    threshold = factor * math.sqrt(max(math.log(m), 1.0)) * max_r
    return sigma >= threshold, sigma / threshold
