"""Single-site samplers over the coefficient space.

Two kernels: plain conditional resampling (gibbs_step) and the variant whose
proposal excludes the current value and corrects with an accept/reject test
(mwg_step). Each step changes at most one coordinate. Candidate sets may be
all of Z (truncated around the conditional center) or a finite per-coordinate
alphabet, which is what the diagnostics boxes and the detection constellations
use.

The step functions are the readable single-step reference; batch runs go
through the kernel backends via run_chain and are deterministic per seed.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import TAIL_FACTOR, density_exponent
from .diagnostics import PmfTable
from .errors import DimensionMismatch, EmptyAlphabet

MWG_DEGENERATE_EPS = 1e-300


@dataclass(frozen=True)
class ScanPolicy:
    """Site-selection probabilities for the random scan."""

    selection_probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.selection_probs, dtype=np.float64).copy()
        if p.ndim != 1 or np.any(p <= 0.0):
            raise ValueError("selection probabilities must be positive")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"selection probabilities sum to {p.sum()!r}")
        p.setflags(write=False)
        object.__setattr__(self, "selection_probs", p)

    @classmethod
    def uniform(cls, n):
        return cls(np.full(n, 1.0 / n))

    def cdf(self):
        c = np.cumsum(self.selection_probs)
        c[-1] = 1.0
        return c


@dataclass(frozen=True)
class ChainState:
    """Current integer coefficients with a cached log target value."""

    coeffs: np.ndarray
    log_target: float

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.int64).copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)


def make_state(basis, params, coeffs):
    return ChainState(np.asarray(coeffs, dtype=np.int64),
                      density_exponent(basis, params, coeffs))


class SiteAlphabet:
    """Per-coordinate candidate sets.

    Mode 0: all of Z, truncated around the conditional center.
    Mode 1: an explicit inclusive integer interval.
    Mode 2: an explicit list of integers (slow path only).
    """

    def __init__(self, modes, lo, hi, sets=None):
        self.modes = np.asarray(modes, dtype=np.int8)
        self.lo = np.asarray(lo, dtype=np.int64)
        self.hi = np.asarray(hi, dtype=np.int64)
        self.sets = sets
        for i, mode in enumerate(self.modes):
            if mode == 1 and self.lo[i] > self.hi[i]:
                raise EmptyAlphabet(f"empty interval at coordinate {i}")
            if mode == 2 and len(sets[i]) == 0:
                raise EmptyAlphabet(f"empty candidate list at coordinate {i}")

    @classmethod
    def integers(cls, n):
        z = np.zeros(n, dtype=np.int64)
        return cls(np.zeros(n, dtype=np.int8), z, z)

    @classmethod
    def interval(cls, n, lo, hi):
        return cls(np.ones(n, dtype=np.int8),
                   np.full(n, lo, dtype=np.int64), np.full(n, hi, dtype=np.int64))

    @classmethod
    def box(cls, bounds):
        lo = np.array([b[0] for b in bounds], dtype=np.int64)
        hi = np.array([b[1] for b in bounds], dtype=np.int64)
        return cls(np.ones(len(bounds), dtype=np.int8), lo, hi)

    @classmethod
    def from_sets(cls, sets):
        n = len(sets)
        arrs = [np.unique(np.asarray(s, dtype=np.int64)) for s in sets]
        lo = np.array([a[0] if len(a) else 0 for a in arrs], dtype=np.int64)
        hi = np.array([a[-1] if len(a) else -1 for a in arrs], dtype=np.int64)
        return cls(np.full(n, 2, dtype=np.int8), lo, hi, sets=arrs)

    @property
    def n(self):
        return len(self.modes)

    def kernel_compatible(self):
        return bool(np.all(self.modes != 2))

    def candidates(self, i, center, sig, tail):
        """Candidate integers at coordinate i given the conditional window."""
        mode = self.modes[i]
        if mode == 0:
            lo = math.ceil(center - tail * sig)
            hi = math.floor(center + tail * sig)
            if lo > hi:
                lo = hi = math.floor(center + 0.5)
            return np.arange(lo, hi + 1, dtype=np.int64)
        if mode == 1:
            return np.arange(self.lo[i], self.hi[i] + 1, dtype=np.int64)
        return self.sets[i]


def _conditional(basis, params, coeffs, i, alphabet, tail_factor):
    """Candidates, probabilities, center and deviation of site i's conditional.

    The exponent in k reduces to -(k - mu)^2 ||b_i||^2 / (2 sigma^2) with
    mu = b_i^T (c - sum_{j != i} x_j b_j) / ||b_i||^2, so the conditional is
    the 1-D integer Gaussian with center mu and deviation sigma/||b_i||,
    renormalized over the candidate set.
    """
    b = basis.b_matrix
    bi = b[:, i]
    nb2 = float(bi @ bi)
    res = b @ coeffs.astype(np.float64) - params.center
    mu = float(coeffs[i] - (bi @ res) / nb2)
    sig = params.sigma / math.sqrt(nb2)
    values = alphabet.candidates(i, mu, sig, tail_factor)
    if len(values) == 0:
        raise EmptyAlphabet(f"no candidates at coordinate {i}")
    e = -((values.astype(np.float64) - mu) ** 2) / (2.0 * sig * sig)
    w = np.exp(e - e.max())
    return values, w / w.sum(), mu, sig


def conditional_pmf(basis, params, state, i, alphabet=None, tail_factor=TAIL_FACTOR):
    """Normalized conditional of coordinate i given the others, as a PmfTable."""
    if not 0 <= i < basis.n:
        raise DimensionMismatch(f"site index {i} out of range for n={basis.n}")
    if alphabet is None:
        alphabet = SiteAlphabet.integers(basis.n)
    values, probs, _, _ = _conditional(basis, params, state.coeffs, i,
                                       alphabet, tail_factor)
    return PmfTable(values, probs)


def _replace(basis, params, state, i, value):
    coeffs = np.array(state.coeffs)
    coeffs[i] = value
    return make_state(basis, params, coeffs)


def _draw_index(probs, u):
    cum = 0.0
    for j, p in enumerate(probs):
        cum += p
        if cum >= u:
            return j
    return len(probs) - 1


def gibbs_step(state, basis, params, scan=None, alphabet=None, rng=None,
               tail_factor=TAIL_FACTOR):
    """Resample one randomly scanned coordinate from its conditional."""
    scan = scan or ScanPolicy.uniform(basis.n)
    alphabet = alphabet or SiteAlphabet.integers(basis.n)
    i = int(np.searchsorted(scan.cdf(), rng.random(), side="right"))
    i = min(i, basis.n - 1)
    values, probs, _, _ = _conditional(basis, params, state.coeffs, i,
                                       alphabet, tail_factor)
    value = int(values[_draw_index(probs, rng.random())])
    if value == state.coeffs[i]:
        return state
    return _replace(basis, params, state, i, value)


def mwg_step(state, basis, params, scan=None, alphabet=None, rng=None,
             tail_factor=TAIL_FACTOR):
    """One proposal-excluding-current step; returns (state, accepted).

    A site whose conditional mass sits entirely on the current value has no
    proposal support; the step is then a self-loop with accepted=False.
    """
    scan = scan or ScanPolicy.uniform(basis.n)
    alphabet = alphabet or SiteAlphabet.integers(basis.n)
    i = int(np.searchsorted(scan.cdf(), rng.random(), side="right"))
    i = min(i, basis.n - 1)
    values, probs, _, _ = _conditional(basis, params, state.coeffs, i,
                                       alphabet, tail_factor)
    cur = int(state.coeffs[i])
    at_cur = np.nonzero(values == cur)[0]
    d_cur = float(probs[at_cur[0]]) if len(at_cur) else 0.0
    rest = 1.0 - d_cur
    if rest < MWG_DEGENERATE_EPS or len(values) - len(at_cur) == 0:
        return state, False
    q = probs.copy()
    if len(at_cur):
        q[at_cur[0]] = 0.0
    q = q / q.sum()
    j = _draw_index(q, rng.random())
    d_new = float(probs[j])
    den = 1.0 - d_new
    alpha = 1.0 if den <= 0.0 else min(1.0, rest / den)
    if rng.random() <= alpha:
        return _replace(basis, params, state, i, int(values[j])), True
    return state, False


@dataclass(frozen=True)
class ChainRun:
    """Output of a batch run: emitted states plus acceptance bookkeeping."""

    samples: np.ndarray
    attempts: np.ndarray
    accepts: np.ndarray
    degenerate: np.ndarray
    final_state: ChainState
    retries: int = 0

    def acceptance_rates(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            r = self.accepts / self.attempts
        return np.where(self.attempts > 0, r, 1.0)


class _UnivariateSampler:
    _mwg = False

    def __init__(self, basis, params, scan=None, alphabet=None,
                 tail_factor=TAIL_FACTOR):
        self.basis = basis
        self.params = params
        self.scan = scan or ScanPolicy.uniform(basis.n)
        self.alphabet = alphabet or SiteAlphabet.integers(basis.n)
        self.tail_factor = tail_factor
        if not self.alphabet.kernel_compatible():
            raise ValueError("explicit candidate lists are not supported in batch "
                             "runs; use interval alphabets or the step functions")

    def initial_state(self, coeffs):
        return make_state(self.basis, self.params, coeffs)

    def run(self, x0, iterations, burn_in=0, thin=1, rng=None,
            checkpoint_steps=0):
        if iterations < burn_in:
            raise ValueError("iterations must be at least burn_in")
        if thin < 1:
            raise ValueError("thin must be >= 1")
        stream = _kernels.as_stream(rng)
        coeffs = x0.coeffs if isinstance(x0, ChainState) else np.asarray(x0, dtype=np.int64)
        res0 = self.basis.b_matrix @ coeffs.astype(np.float64) - self.params.center
        out = _kernels.active.run_univariate(
            self.basis.columns(), self.basis.column_norms_sq(), self.params.sigma,
            self.scan.cdf(), self.alphabet.modes, self.alphabet.lo, self.alphabet.hi,
            self.tail_factor, self._mwg, coeffs, res0,
            int(iterations), int(burn_in), int(thin), int(checkpoint_steps), stream)
        final = ChainState(out["final_x"],
                           -out["final_d2"] / (2.0 * self.params.sigma ** 2))
        run = ChainRun(samples=out["samples"], attempts=out["attempts"],
                       accepts=out["accepts"], degenerate=out["degenerate"],
                       final_state=final)
        return run, out


class GibbsSampler(_UnivariateSampler):
    """Random-scan conditional resampling kernel."""

    kind = "gibbs"
    _mwg = False

    def step(self, state, rng):
        return gibbs_step(state, self.basis, self.params, self.scan,
                          self.alphabet, rng, self.tail_factor)


class MwgSampler(_UnivariateSampler):
    """Random-scan kernel with current-value-excluding proposals."""

    kind = "mwg"
    _mwg = True

    def step(self, state, rng):
        return mwg_step(state, self.basis, self.params, self.scan,
                        self.alphabet, rng, self.tail_factor)


def run_chain(kernel, x0, iterations, burn_in=0, thin=1, rng=None):
    """Drive a sampler (or bare step callable) and collect the emitted states.

    Emits the state after every `thin`-th step past burn_in; deterministic
    given the seed. Acceptance statistics are per site for batch samplers and
    aggregate for bare callables.
    """
    if iterations < burn_in:
        raise ValueError("iterations must be at least burn_in")
    if hasattr(kernel, "run"):
        run, _ = kernel.run(x0, iterations, burn_in, thin, rng)
        return run
    state = x0
    kept = []
    attempts = np.zeros(1, dtype=np.int64)
    accepts = np.zeros(1, dtype=np.int64)
    for t in range(1, iterations + 1):
        result = kernel(state, rng)
        if isinstance(result, tuple):
            state, accepted = result
            attempts[0] += 1
            accepts[0] += int(accepted)
        else:
            state = result
            attempts[0] += 1
            accepts[0] += 1
        if t > burn_in and (t - burn_in) % thin == 0:
            kept.append(state.coeffs)
    n = len(state.coeffs)
    samples = np.array(kept, dtype=np.int64).reshape(len(kept), n)
    return ChainRun(samples=samples, attempts=attempts, accepts=accepts,
                    degenerate=np.zeros(1, dtype=np.int64), final_state=state)
