"""Cross-backend contract: the compiled kernels are bit-identical twins of the
pure-Python ones, and uniform consumption does not depend on how a run is
split into kernel calls."""

import numpy as np
import pytest

from lattice_gibbs._kernels import compiled, pure
from lattice_gibbs._kernels.streams import UniformStream

pytestmark = pytest.mark.skipif(compiled is None,
                                reason="compiled kernels not built")


def univariate_args(mwg, iterations, burn_in=0, thin=1, checkpoints=0):
    b = np.array([[1.0, 0.5], [0.0, 1.1]])
    cols = np.ascontiguousarray(b.T)
    norms2 = (cols ** 2).sum(axis=1)
    x0 = np.array([2, -1], dtype=np.int64)
    res0 = b @ x0 - np.array([0.3, -0.2])
    return (cols, norms2, 0.9, np.array([0.4, 1.0]), np.zeros(2, dtype=np.int8),
            np.zeros(2, dtype=np.int64), np.zeros(2, dtype=np.int64), 12.0,
            mwg, x0, res0, iterations, burn_in, thin, checkpoints)


@pytest.mark.parametrize("sigma,spacing,offset", [
    (1.0, 1.0, 0.0), (0.3, 1.1, 0.44), (2.5, 0.7, -3.3), (0.05, 1.0, 0.49),
])
def test_theta_bitwise(sigma, spacing, offset):
    assert pure.theta_sum(sigma, spacing, offset, 1e-15) == \
        compiled.theta_sum(sigma, spacing, offset, 1e-15)


def test_dgauss_draw_bitwise():
    us = np.random.default_rng(7).random(5000)
    a = pure.dgauss_draw_many(1.3, 0.7, -20, 20, us)
    b = compiled.dgauss_draw_many(1.3, 0.7, -20, 20, us)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("mwg", [False, True])
def test_run_univariate_bitwise(mwg):
    args = univariate_args(mwg, 4000, burn_in=100, thin=3, checkpoints=10)
    a = pure.run_univariate(*args, UniformStream(42))
    b = compiled.run_univariate(*args, UniformStream(42))
    for key in ("samples", "final_x", "final_res", "attempts", "accepts",
                "degenerate", "best_x", "trace", "cp_best"):
        assert np.array_equal(a[key], b[key]), key
    assert a["best_d2"] == b["best_d2"]
    assert a["final_d2"] == b["final_d2"]


def test_gk_block_draw_bitwise():
    b = np.array([[1.0, 0.5], [0.0, 1.1]])
    q, r = np.linalg.qr(b)
    s = np.sign(np.diag(r))
    q, r = q * s, s[:, None] * r
    cp = q.T @ np.array([0.3, -0.2])
    denoms = np.array([pure.theta_sum(0.7, r[i, i], 0.0, 1e-15) for i in range(2)])
    mode = np.zeros(2, dtype=np.int8)
    z = np.zeros(2, dtype=np.int64)
    for seed in range(20):
        z1, z2 = z.copy(), z.copy()
        out1 = pure.gk_block_draw(r, cp, z1, 2, 0.7, 12.0, 100, 1e-15, mode,
                                  z, z, denoms, UniformStream(seed))
        out2 = compiled.gk_block_draw(r, cp, z2, 2, 0.7, 12.0, 100, 1e-15, mode,
                                      z, z, denoms, UniformStream(seed))
        assert out1[0] == out2[0]
        assert np.array_equal(z1, z2)
        assert np.array_equal(out1[1], out2[1])
        assert out1[2] == out2[2] and out1[3] == out2[3]


def test_stream_consumption_is_segment_invariant():
    # one call of 1000 steps == four calls of 250 sharing the stream
    args_full = univariate_args(False, 1000)
    full = compiled.run_univariate(*args_full, UniformStream(9))

    b = np.array([[1.0, 0.5], [0.0, 1.1]])
    stream = UniformStream(9)
    x = np.array([2, -1], dtype=np.int64)
    pieces = []
    for _ in range(4):
        res = b @ x - np.array([0.3, -0.2])
        cols = np.ascontiguousarray(b.T)
        norms2 = (cols ** 2).sum(axis=1)
        out = compiled.run_univariate(
            cols, norms2, 0.9, np.array([0.4, 1.0]), np.zeros(2, dtype=np.int8),
            np.zeros(2, dtype=np.int64), np.zeros(2, dtype=np.int64), 12.0,
            False, x, res, 250, 0, 1, 0, stream)
        pieces.append(out["samples"])
        x = out["final_x"]
    assert np.array_equal(np.vstack(pieces), full["samples"])


def test_backend_selection_env(monkeypatch):
    import importlib

    import lattice_gibbs._kernels as K
    monkeypatch.setenv("LATTICE_GIBBS_PURE", "1")
    mod = importlib.reload(K)
    try:
        assert mod.BACKEND == "pure"
    finally:
        monkeypatch.delenv("LATTICE_GIBBS_PURE")
        importlib.reload(K)
