"""Sampler-based MIMO detection experiments.

Square complex channels with unit-variance Gaussian fading, Gray-labelled
square QAM, a real-valued lattice embedding, zero-forcing (Babai) chain
initialization, and bit-error-rate curves versus the sampling iteration
budget. Trials are embarrassingly parallel; error counts are integers so
aggregation is order-independent.
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .blocked import GkSampler
from .core import GaussianParams, LatticeBasis, build_basis
from .klein import klein_sample
from .tempering import TemperLadder, pt_run
from .univariate import GibbsSampler, MwgSampler, SiteAlphabet, make_state

QAM_ORDERS = (4, 16, 64)


def gray_encode(u):
    return u ^ (u >> 1)


def pam_bits(Q):
    return int(math.log2(Q))


def bit_errors(u_a, u_b, Q):
    """Hamming distance of the Gray labels of two PAM integer vectors."""
    g = gray_encode(np.asarray(u_a, dtype=np.int64)) ^ gray_encode(
        np.asarray(u_b, dtype=np.int64))
    return int(sum(bin(int(v)).count("1") for v in g))


def noise_variance(n, qam_order, snr_db):
    """Per-complex-dimension noise power from the Eb/N0 identity."""
    return n / (math.log2(qam_order) * 10.0 ** (snr_db / 10.0))


def snr_from_noise(n, qam_order, noise_var):
    return 10.0 * math.log10(n / (math.log2(qam_order) * noise_var))


@dataclass(frozen=True)
class DetectionInstance:
    """One frame: channel, transmitted symbols, received vector, noise level."""

    channel: np.ndarray
    tx_symbols: np.ndarray
    tx_pam: np.ndarray
    rx: np.ndarray
    noise_var: float
    snr_db: float
    qam_order: int

    def __post_init__(self):
        back = snr_from_noise(self.channel.shape[0], self.qam_order, self.noise_var)
        if abs(back - self.snr_db) > 1e-12:
            raise ValueError("noise variance inconsistent with the configured SNR")

    @property
    def n(self):
        return self.channel.shape[0]

    @property
    def pam_levels(self):
        return int(round(math.sqrt(self.qam_order)))


def generate_instance(n, qam_order, snr_db, rng, noise_scale=1.0):
    """Fresh frame with uniform symbols and CN(0, noise_var) noise.

    noise_scale is a test hook (0 silences the noise while keeping the
    configured noise_var metadata)."""
    if qam_order not in QAM_ORDERS:
        raise ValueError(f"qam_order must be one of {QAM_ORDERS}")
    if n < 1:
        raise ValueError("n must be >= 1")
    Q = int(round(math.sqrt(qam_order)))
    h = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)
    u = rng.integers(0, Q, size=2 * n)
    amps = 2 * u - (Q - 1)
    x = amps[:n] + 1j * amps[n:]
    nv = noise_variance(n, qam_order, snr_db)
    w = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * math.sqrt(nv / 2.0)
    rx = h @ x + noise_scale * w
    return DetectionInstance(channel=h, tx_symbols=(u[:n] + Q * u[n:]).astype(np.int64),
                             tx_pam=u.astype(np.int64), rx=rx, noise_var=nv,
                             snr_db=snr_db, qam_order=qam_order)


@dataclass(frozen=True)
class RealizedLattice:
    """Real 2n-dimensional decoding lattice with a consecutive-integer alphabet.

    PAM amplitudes 2u - (Q-1) are absorbed by doubling the embedded channel
    and shifting the center, so coefficient distances equal complex-model
    distances exactly."""

    basis: LatticeBasis
    center: np.ndarray
    alphabet: SiteAlphabet
    qam_order: int


def channel_embedding(h):
    """Standard real/imaginary block stacking of a complex matrix."""
    return np.block([[h.real, -h.imag], [h.imag, h.real]])


def realize_lattice(instance):
    hr = channel_embedding(instance.channel)
    basis = build_basis(2.0 * hr)
    Q = instance.pam_levels
    rx_real = np.concatenate([instance.rx.real, instance.rx.imag])
    center = rx_real + (Q - 1) * hr @ np.ones(2 * instance.n)
    alphabet = SiteAlphabet.interval(2 * instance.n, 0, Q - 1)
    return RealizedLattice(basis=basis, center=center, alphabet=alphabet,
                           qam_order=instance.qam_order)


def klein_sigma(basis, dims=None):
    """Default sampling deviation: smallest level norm over sqrt(log2 n)."""
    n = dims if dims is not None else basis.n
    return float(np.min(basis.gs_norms)) / math.sqrt(math.log2(n))


def babai_round(realized):
    """Zero-forcing: round the real solve, clamped into the alphabet."""
    y = np.linalg.solve(realized.basis.b_matrix, realized.center)
    u = np.round(y).astype(np.int64)
    u = np.clip(u, realized.alphabet.lo, realized.alphabet.hi)
    params = GaussianParams(1.0, realized.center)
    return make_state(realized.basis, params, u)


@dataclass(frozen=True)
class SamplerSpec:
    """Which sampler to run and its knobs."""

    kind: str
    m: int = 2
    temps: tuple = (1.0, 2.0)
    swap_stride: int = None

    def __post_init__(self):
        if self.kind not in ("gibbs", "mwg", "gk", "pt", "klein"):
            raise ValueError(f"unknown sampler kind {self.kind!r}")

    @property
    def name(self):
        if self.kind == "gk":
            return f"gk{self.m}"
        if self.kind == "pt":
            return "pt" + "-".join(f"{t:g}" for t in self.temps)
        return self.kind


@dataclass(frozen=True)
class DetectResult:
    """Running-minimum candidates per full iteration; row 0 is the initializer."""

    best_by_iteration: np.ndarray
    distance_trace: np.ndarray

    def best(self, iterations):
        return self.best_by_iteration[iterations]


def _distance(realized, coeffs):
    d = realized.basis.b_matrix @ coeffs.astype(np.float64) - realized.center
    return math.sqrt(float(d @ d))


def detect(realized, spec, full_iterations, seed, sigma_rule="klein",
           retry_cap=100000):
    """Run a sampler from the Babai state and track the best candidate.

    One full iteration is 2n single-site updates, ceil(2n/m) block updates,
    or one independent backward-pass draw. The distance trace is the running
    minimum of ||B u - c|| over every visited candidate, so it never increases
    with the iteration budget."""
    dims = realized.basis.n
    sigma = klein_sigma(realized.basis) if sigma_rule == "klein" else float(sigma_rule)
    params = GaussianParams(sigma, realized.center)
    x0 = babai_round(realized)
    start = np.array(x0.coeffs)
    d0 = _distance(realized, start)
    best_rows = np.empty((full_iterations + 1, dims), dtype=np.int64)
    dists = np.empty(full_iterations + 1)
    best_rows[0] = start
    dists[0] = d0
    if full_iterations == 0:
        return DetectResult(best_rows, dists)

    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    if spec.kind in ("gibbs", "mwg"):
        cls = GibbsSampler if spec.kind == "gibbs" else MwgSampler
        sampler = cls(realized.basis, params, alphabet=realized.alphabet)
        steps = dims
        _, out = sampler.run(x0, full_iterations * steps, rng=np.random.default_rng(ss),
                             checkpoint_steps=steps)
        best_rows[1:] = out["cp_best"]
        dists[1:] = np.sqrt(out["trace"])
    elif spec.kind == "gk":
        sampler = GkSampler(realized.basis, params, block_size=spec.m,
                            retry_cap=retry_cap, alphabet=realized.alphabet)
        steps = math.ceil(dims / spec.m)
        _, out = sampler.run(x0, full_iterations * steps, rng=np.random.default_rng(ss),
                             checkpoint_steps=steps)
        best_rows[1:] = out["cp_best"]
        dists[1:] = np.sqrt(out["trace"])
    elif spec.kind == "pt":
        stride = spec.swap_stride if spec.swap_stride is not None else dims
        ladder = TemperLadder(spec.temps, swap_stride=stride)
        children = ss.spawn(ladder.m + 1)
        base = GaussianParams(sigma, realized.center)

        def make_kernel(p):
            return MwgSampler(realized.basis, p, alphabet=realized.alphabet)

        _, out = pt_run(ladder, make_kernel, realized.basis, base, x0,
                        full_iterations * dims, chain_seeds=children[:-1],
                        swap_seed=children[-1], checkpoint_steps=dims)
        best_rows[1:] = out["cp_best"]
        dists[1:] = np.sqrt(out["trace"])
    elif spec.kind == "klein":
        rng = np.random.default_rng(ss)
        best = start
        best_d = d0
        for it in range(1, full_iterations + 1):
            draw = klein_sample(realized.basis, params, rng)
            u = np.clip(draw.coeffs, realized.alphabet.lo, realized.alphabet.hi)
            d = _distance(realized, u)
            if d < best_d:
                best_d = d
                best = u
            best_rows[it] = best
            dists[it] = best_d
    else:
        raise ValueError(f"unknown sampler kind {spec.kind!r}")

    guard = np.minimum.accumulate(dists)
    return DetectResult(best_rows, guard)


@dataclass(frozen=True)
class MimoConfig:
    """Grid definition for a BER experiment."""

    n: int
    qam_order: int
    snr_db: tuple
    samplers: tuple
    iterations: tuple
    trials: int
    seed: int = 0
    seeds: tuple = None
    sigma_rule: str = "klein"
    retry_cap: int = 100000

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        its = tuple(sorted(int(i) for i in self.iterations))
        if any(i < 0 for i in its):
            raise ValueError("iteration counts must be >= 0")
        object.__setattr__(self, "iterations", its)
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        object.__setattr__(self, "samplers", tuple(self.samplers))
        if self.seeds is not None and len(self.seeds) < self.trials:
            raise ValueError("need at least one seed per trial")

    def trial_entropy(self, snr_idx, trial):
        if self.seeds is not None:
            return np.random.SeedSequence([int(self.seeds[trial]), snr_idx])
        return np.random.SeedSequence([self.seed, snr_idx, trial])


def _trial_error_counts(config, snr_idx, trials):
    """Bit-error counts for a range of trials: {sampler: (len(iterations),) int}."""
    snr = config.snr_db[snr_idx]
    max_iter = max(config.iterations)
    counts = {s.name: np.zeros(len(config.iterations), dtype=np.int64)
              for s in config.samplers}
    for trial in trials:
        root = config.trial_entropy(snr_idx, trial)
        inst_ss, samp_ss = root.spawn(2)
        inst = generate_instance(config.n, config.qam_order, snr,
                                 np.random.default_rng(inst_ss))
        realized = realize_lattice(inst)
        Q = inst.pam_levels
        per_sampler = samp_ss.spawn(len(config.samplers))
        for spec, child in zip(config.samplers, per_sampler):
            result = detect(realized, spec, max_iter, child,
                            sigma_rule=config.sigma_rule,
                            retry_cap=config.retry_cap)
            for j, it in enumerate(config.iterations):
                counts[spec.name][j] += bit_errors(result.best(it), inst.tx_pam, Q)
    return counts


def _worker(args):
    return _trial_error_counts(*args)


def ber_experiment(config, threads=None):
    """Run the grid; returns rows of
    (sampler, n, qam, snr_db, iterations, trials, ber, ci_halfwidth)."""
    if threads is None:
        threads = int(os.environ.get("LATTICE_GIBBS_THREADS", "1"))
    bits_per_trial = 2 * config.n * pam_bits(int(round(math.sqrt(config.qam_order))))
    total_bits = bits_per_trial * config.trials
    rows = []
    for snr_idx, snr in enumerate(config.snr_db):
        if threads > 1:
            chunks = np.array_split(np.arange(config.trials), threads)
            jobs = [(config, snr_idx, chunk.tolist()) for chunk in chunks if len(chunk)]
            with ProcessPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(_worker, jobs))
            counts = parts[0]
            for part in parts[1:]:
                for name in counts:
                    counts[name] += part[name]
        else:
            counts = _trial_error_counts(config, snr_idx, range(config.trials))
        for spec in config.samplers:
            for j, it in enumerate(config.iterations):
                errs = int(counts[spec.name][j])
                ber = errs / total_bits
                ci = 1.96 * math.sqrt(max(ber * (1.0 - ber), 0.0) / total_bits)
                rows.append({"sampler": spec.name, "n": config.n,
                             "qam": config.qam_order, "snr_db": snr,
                             "iterations": it, "trials": config.trials,
                             "ber": ber, "ci_halfwidth": ci})
    return rows


BER_COLUMNS = ("sampler", "n", "qam", "snr_db", "iterations", "trials",
               "ber", "ci_halfwidth")


def write_ber_csv(path, rows):
    with open(path, "w") as fh:
        fh.write(",".join(BER_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[c]) for c in BER_COLUMNS) + "\n")


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)
