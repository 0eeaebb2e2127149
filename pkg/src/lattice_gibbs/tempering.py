"""Parallel tempering: chains at scaled deviations with periodic state swaps.

Chain j targets the lattice Gaussian with deviation t_j * sigma. After every
swap_stride kernel steps, adjacent pairs (1,2), (2,3), ... are attempted in
fixed ascending order, each with a fresh uniform from a swap stream that is
kept separate from the chain streams, so disabling swaps leaves the chain
trajectories untouched. Only the cold chain (t_1 = 1) is emitted.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import GaussianParams
from .univariate import ChainState, make_state


@dataclass(frozen=True)
class TemperLadder:
    """Temperatures (strictly increasing, t_1 = 1) and swap cadence."""

    temps: tuple
    swap_stride: int = 1
    seeds: tuple = None

    def __post_init__(self):
        temps = tuple(float(t) for t in self.temps)
        if not temps or temps[0] != 1.0:
            raise ValueError("ladder must start at temperature 1")
        if any(b <= a for a, b in zip(temps, temps[1:])):
            raise ValueError("temperatures must be strictly increasing")
        if self.swap_stride < 1:
            raise ValueError("swap_stride must be >= 1")
        if self.seeds is not None and len(self.seeds) != len(temps):
            raise ValueError("need one seed per temperature")
        object.__setattr__(self, "temps", temps)

    @property
    def m(self):
        return len(self.temps)


def _energy(basis, params, state):
    diff = basis.b_matrix @ state.coeffs.astype(np.float64) - params.center
    return float(diff @ diff)


def swap_log_ratio(state_j, state_j1, basis, params, t_j, t_j1):
    """Log of the (clamped) swap acceptance for adjacent ladder levels.

    Normalizing constants cancel exactly, so only the unnormalized exponents
    enter: (E_j - E_j1) * (1/(2 (t_j sigma)^2) - 1/(2 (t_j1 sigma)^2))."""
    e_j = _energy(basis, params, state_j)
    e_j1 = _energy(basis, params, state_j1)
    s2 = params.sigma ** 2
    log_ratio = (e_j - e_j1) * (1.0 / (2.0 * t_j * t_j * s2)
                                - 1.0 / (2.0 * t_j1 * t_j1 * s2))
    return min(0.0, log_ratio)


@dataclass(frozen=True)
class PtRun:
    """Cold-chain output plus swap statistics."""

    samples: np.ndarray
    swap_attempts: np.ndarray
    swap_accepts: np.ndarray
    chain_attempts: np.ndarray
    chain_accepts: np.ndarray
    chain_degenerate: np.ndarray
    final_states: list

    def swap_rates(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            r = self.swap_accepts / self.swap_attempts
        return np.where(self.swap_attempts > 0, r, 0.0)


def pt_run(ladder, make_kernel, basis, params, x0, iterations, burn_in=0,
           thin=1, chain_seeds=None, swap_seed=None, disable_swaps=False,
           checkpoint_steps=0):
    """Run the ladder and emit the cold chain.

    make_kernel maps scaled GaussianParams to a sampler with .run(). Chains
    advance sequentially in swap_stride segments; results are identical to
    any parallel schedule because every chain owns its own stream.
    """
    if iterations < burn_in:
        raise ValueError("iterations must be at least burn_in")
    m = ladder.m
    if chain_seeds is None:
        chain_seeds = ladder.seeds
    if chain_seeds is None:
        raise ValueError("chain seeds are required (ladder.seeds or chain_seeds)")
    if len(chain_seeds) != m:
        raise ValueError("need one chain seed per temperature")
    if swap_seed is None:
        try:
            ints = [int(s) % (2 ** 63) for s in chain_seeds]
        except (TypeError, ValueError) as exc:
            raise ValueError("swap_seed is required when chain seeds are not "
                             "plain integers") from exc
        swap_seed = int(np.random.SeedSequence([9, *ints]).generate_state(1)[0])

    scaled = [GaussianParams(t * params.sigma, params.center) for t in ladder.temps]
    kernels = [make_kernel(p) for p in scaled]
    streams = [_kernels.as_stream(np.random.default_rng(s)) for s in chain_seeds]
    swap_stream = _kernels.as_stream(np.random.default_rng(swap_seed))

    if isinstance(x0, ChainState):
        x0 = x0.coeffs
    states = [make_state(basis, p, x0) for p in scaled]

    n = basis.n
    kept = []
    swap_attempts = np.zeros(max(m - 1, 1), dtype=np.int64)
    swap_accepts = np.zeros(max(m - 1, 1), dtype=np.int64)
    chain_attempts = np.zeros((m, n), dtype=np.int64)
    chain_accepts = np.zeros((m, n), dtype=np.int64)
    chain_degenerate = np.zeros((m, n), dtype=np.int64)

    track = checkpoint_steps > 0
    ncp = iterations // checkpoint_steps if track else 0
    trace = np.empty(ncp)
    cp_best = np.empty((ncp, n), dtype=np.int64)

    def dist2(coeffs):
        d = basis.b_matrix @ coeffs.astype(np.float64) - params.center
        return float(d @ d)

    best_d2 = dist2(np.asarray(x0, dtype=np.int64))
    best_x = np.array(x0, dtype=np.int64)

    done = 0
    cp_written = 0
    while done < iterations:
        seg = min(ladder.swap_stride, iterations - done)
        seg_samples = None
        for j in range(m):
            run, _ = kernels[j].run(states[j], seg, burn_in=0, thin=1,
                                    rng=streams[j])
            states[j] = run.final_state
            if run.attempts.shape == (n,):
                chain_attempts[j] += run.attempts
                chain_accepts[j] += run.accepts
                chain_degenerate[j] += run.degenerate
            if j == 0:
                seg_samples = run.samples
        for t_local, coeffs in enumerate(seg_samples):
            t_global = done + t_local + 1
            if track:
                d2 = dist2(coeffs)
                if d2 < best_d2:
                    best_d2 = d2
                    best_x = coeffs.copy()
                if t_global % checkpoint_steps == 0 and cp_written < ncp:
                    trace[cp_written] = best_d2
                    cp_best[cp_written] = best_x
                    cp_written += 1
            if t_global > burn_in and (t_global - burn_in) % thin == 0:
                kept.append(coeffs)
        done += seg
        if seg == ladder.swap_stride:
            for j in range(m - 1):
                u = swap_stream.next()
                if disable_swaps:
                    continue
                swap_attempts[j] += 1
                log_alpha = swap_log_ratio(states[j], states[j + 1], basis,
                                           params, ladder.temps[j],
                                           ladder.temps[j + 1])
                if u <= math.exp(log_alpha):
                    swap_accepts[j] += 1
                    cj, cj1 = states[j].coeffs, states[j + 1].coeffs
                    states[j] = make_state(basis, scaled[j], cj1)
                    states[j + 1] = make_state(basis, scaled[j + 1], cj)

    samples = np.array(kept, dtype=np.int64).reshape(len(kept), n)
    run = PtRun(samples=samples, swap_attempts=swap_attempts,
                swap_accepts=swap_accepts, chain_attempts=chain_attempts,
                chain_accepts=chain_accepts, chain_degenerate=chain_degenerate,
                final_states=states)
    return run, {"best_x": best_x, "best_d2": best_d2, "trace": trace,
                 "cp_best": cp_best}
