from collections import Counter

import numpy as np
import pytest

from lattice_gibbs import (Box, GaussianParams, GibbsSampler, MwgSampler,
                           ScanPolicy, SiteAlphabet, build_basis, build_kernel,
                           conditional_pmf, enumerate_target, gibbs_step,
                           make_state, mwg_step, run_chain)
from lattice_gibbs.errors import EmptyAlphabet


@pytest.fixture
def boxed(basis2d, params2d):
    box = Box.cube(2, 4)
    return box, enumerate_target(basis2d, params2d, box)


class TestScanPolicy:
    def test_uniform(self):
        assert np.allclose(ScanPolicy.uniform(4).selection_probs, 0.25)

    def test_rejects_bad_probs(self):
        with pytest.raises(ValueError):
            ScanPolicy(np.array([0.5, 0.6]))
        with pytest.raises(ValueError):
            ScanPolicy(np.array([1.0, 0.0]))


class TestConditional:
    def test_orthogonal_decoupling(self):
        basis = build_basis(np.eye(2))
        params = GaussianParams(1.0, np.zeros(2))
        t1 = conditional_pmf(basis, params, make_state(basis, params, [0, 0]), 0)
        t2 = conditional_pmf(basis, params, make_state(basis, params, [0, 7]), 0)
        for k in range(-5, 6):
            assert t1.prob(k) == pytest.approx(t2.prob(k), abs=1e-15)

    def test_brute_force_center(self, basis2d):
        # site 0 with x2 = 1, c = 0: center -0.5, deviation 1
        params = GaussianParams(1.0, np.zeros(2))
        state = make_state(basis2d, params, [0, 1])
        table = conditional_pmf(basis2d, params, state, 0)
        ks = np.arange(-20, 21)
        w = np.exp(-0.5 * (ks + 0.5) ** 2)
        w /= w.sum()
        for k, p in zip(ks, w):
            assert table.prob(int(k)) == pytest.approx(p, abs=1e-13)

    def test_normalized(self, basis2d, params2d):
        state = make_state(basis2d, params2d, [2, -1])
        for i in range(2):
            table = conditional_pmf(basis2d, params2d, state, i)
            assert abs(table.probs.sum() - 1.0) < 1e-12

    def test_empty_alphabet(self):
        with pytest.raises(EmptyAlphabet):
            SiteAlphabet.box([(3, 2), (0, 1)])


class TestSteps:
    def test_degenerate_alphabet_self_loop(self, basis2d, params2d):
        alphabet = SiteAlphabet.from_sets([[2], [-1]])
        state = make_state(basis2d, params2d, [2, -1])
        rng = np.random.default_rng(0)
        for _ in range(10):
            new = gibbs_step(state, basis2d, params2d, alphabet=alphabet, rng=rng)
            assert np.array_equal(new.coeffs, state.coeffs)

    def test_one_coordinate_changes(self, basis2d, params2d):
        rng = np.random.default_rng(1)
        state = make_state(basis2d, params2d, [0, 0])
        for _ in range(200):
            new = gibbs_step(state, basis2d, params2d, rng=rng)
            assert np.sum(new.coeffs != state.coeffs) <= 1
            state = new
        for _ in range(200):
            new, accepted = mwg_step(state, basis2d, params2d, rng=rng)
            diff = np.sum(new.coeffs != state.coeffs)
            assert diff <= 1
            if not accepted:
                assert diff == 0
            state = new

    def test_log_target_cached_consistently(self, basis2d, params2d):
        from lattice_gibbs import density_exponent
        rng = np.random.default_rng(2)
        state = make_state(basis2d, params2d, [1, 1])
        for _ in range(100):
            state = gibbs_step(state, basis2d, params2d, rng=rng)
            assert state.log_target == pytest.approx(
                density_exponent(basis2d, params2d, state.coeffs), abs=1e-10)

    def test_mwg_two_point_hand_oracle(self, basis2d, params2d):
        # alphabet {a, b}: proposal is the other point w.p. 1 and
        # alpha = min(1, D(b)/D(a)) since 1 - D(a) = D(b)
        alphabet = SiteAlphabet.from_sets([[0, 1], [0]])
        state = make_state(basis2d, params2d, [0, 0])
        table = conditional_pmf(basis2d, params2d, state, 0, alphabet)
        d_a, d_b = table.prob(0), table.prob(1)
        expected_alpha = min(1.0, d_b / d_a)
        scan = ScanPolicy(np.array([1.0 - 1e-12, 1e-12]))
        accepted = 0
        trials = 40000
        rng = np.random.default_rng(3)
        for _ in range(trials):
            new, ok = mwg_step(state, basis2d, params2d, scan=scan,
                               alphabet=alphabet, rng=rng)
            if ok:
                assert new.coeffs[0] == 1
                accepted += 1
        rate = accepted / trials
        assert abs(rate - expected_alpha) < 4.0 * np.sqrt(expected_alpha / trials)

    def test_mwg_downhill_always_accepted(self, basis2d, params2d):
        # moving to a value with no more conditional mass has alpha = 1
        state = make_state(basis2d, params2d, [0, 0])
        rng = np.random.default_rng(4)
        for _ in range(500):
            new, ok = mwg_step(state, basis2d, params2d, rng=rng)
            if ok:
                i = int(np.argmax(new.coeffs != state.coeffs))
                table = conditional_pmf(basis2d, params2d, state, i)
                if table.prob(int(new.coeffs[i])) <= table.prob(int(state.coeffs[i])):
                    pass  # accepted as required
            state = new


class TestEnumeratedKernels:
    def test_row_sums(self, basis2d, params2d, boxed):
        box, _ = boxed
        for kind in ("gibbs", "mwg"):
            k = build_kernel(kind, basis2d, params2d, box)
            assert np.max(np.abs(k.matrix.sum(axis=1) - 1.0)) < 1e-12

    def test_detailed_balance_and_stationarity(self, basis2d, params2d, boxed):
        box, target = boxed
        pi = target.probs
        for kind in ("gibbs", "mwg"):
            k = build_kernel(kind, basis2d, params2d, box)
            flow = pi[:, None] * k.matrix
            assert np.max(np.abs(flow - flow.T)) < 1e-12
            assert np.max(np.abs(pi @ k.matrix - pi)) < 1e-12

    def test_offdiagonal_dominance(self, basis2d, params2d, boxed):
        box, _ = boxed
        pg = build_kernel("gibbs", basis2d, params2d, box).matrix
        pm = build_kernel("mwg", basis2d, params2d, box).matrix
        off = ~np.eye(len(pg), dtype=bool)
        assert np.all(pm[off] >= pg[off] - 1e-12)
        assert np.all(np.diag(pm) <= np.diag(pg) + 1e-12)

    def test_one_step_frequencies_match_matrix(self, basis2d, params2d, boxed):
        box, target = boxed
        kernel = build_kernel("gibbs", basis2d, params2d, box)
        alphabet = SiteAlphabet.box(list(zip(box.lo, box.hi)))
        x0 = (1, -1)
        state = make_state(basis2d, params2d, x0)
        rng = np.random.default_rng(5)
        reps = 10 ** 5
        freq = Counter()
        for _ in range(reps):
            new = gibbs_step(state, basis2d, params2d, alphabet=alphabet, rng=rng)
            freq[tuple(new.coeffs)] += 1
        row = kernel.matrix[target.index_of(x0)]
        for j, s in enumerate(kernel.states):
            p = row[j]
            se = np.sqrt(max(p * (1 - p), 1e-12) / reps)
            assert abs(freq.get(tuple(s), 0) / reps - p) < max(3.0 * se, 2e-4)


class TestRunChain:
    def test_boundary_empty(self, basis2d, params2d):
        sampler = GibbsSampler(basis2d, params2d)
        run = run_chain(sampler, make_state(basis2d, params2d, [0, 0]),
                        iterations=50, burn_in=50, rng=np.random.default_rng(0))
        assert run.samples.shape == (0, 2)

    def test_determinism(self, basis2d, params2d):
        sampler = MwgSampler(basis2d, params2d)
        runs = [run_chain(sampler, make_state(basis2d, params2d, [0, 0]), 2000,
                          burn_in=100, thin=2, rng=np.random.default_rng(42))
                for _ in range(2)]
        assert np.array_equal(runs[0].samples, runs[1].samples)
        assert np.array_equal(runs[0].accepts, runs[1].accepts)

    def test_long_run_tv(self, basis2d, params2d, boxed):
        box, target = boxed
        alphabet = SiteAlphabet.box(list(zip(box.lo, box.hi)))
        sampler = GibbsSampler(basis2d, params2d, alphabet=alphabet)
        run = run_chain(sampler, make_state(basis2d, params2d, [0, 0]), 10 ** 5,
                        burn_in=1000, rng=np.random.default_rng(6))
        counts = Counter(map(tuple, run.samples))
        emp = {k: v / len(run.samples) for k, v in counts.items()}
        tv = 0.5 * sum(abs(emp.get(k, 0.0) - target.prob(k))
                       for k in set(emp) | set(target.as_dict()))
        assert tv < 0.02

    def test_generic_callable_kernel(self, basis2d, params2d):
        calls = []

        def step(state, rng):
            calls.append(1)
            return gibbs_step(state, basis2d, params2d, rng=rng)

        run = run_chain(step, make_state(basis2d, params2d, [0, 0]), 20,
                        burn_in=5, rng=np.random.default_rng(1))
        assert len(calls) == 20
        assert run.samples.shape == (15, 2)

    def test_gibbs_acceptance_is_one(self, basis2d, params2d):
        sampler = GibbsSampler(basis2d, params2d)
        run = run_chain(sampler, make_state(basis2d, params2d, [0, 0]), 500,
                        rng=np.random.default_rng(2))
        assert np.all(run.acceptance_rates() == 1.0)

    def test_mwg_degeneracy_counter(self, basis2d):
        # tiny sigma: conditionals concentrate, steps degenerate to self-loops
        params = GaussianParams(0.01, np.array([1.0, 1.1]))
        sampler = MwgSampler(basis2d, params)
        run = run_chain(sampler, make_state(basis2d, params, [1, 1]), 200,
                        rng=np.random.default_rng(3))
        assert run.degenerate.sum() > 0
