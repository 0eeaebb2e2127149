"""Pure-Python kernels.

Reference implementation of the hot inner loops. The compiled extension in
``_ckernels.pyx`` mirrors this module statement for statement: both consume
uniforms in the same order and perform the same float64 operations, so runs
are bit-identical across backends. Keep the two files in sync.

Scalar math uses ``math.exp``/``math.floor`` (libm doubles) rather than numpy
ufuncs so that rounding matches the C code exactly.
"""

import math

import numpy as np

BACKEND_NAME = "pure"


def theta_sum(sigma, spacing, offset, rel_tol):
    """Gaussian mass of the 1-D lattice spacing*Z + offset, relative error rel_tol."""
    inv = 1.0 / (2.0 * sigma * sigma)
    k0 = math.floor(-offset / spacing + 0.5)
    a0 = spacing * k0 + offset
    e0 = a0 * a0 * inv
    total = 1.0
    t = 1.0
    while True:
        ap = spacing * (k0 + t) + offset
        am = spacing * (k0 - t) + offset
        tp = math.exp(e0 - ap * ap * inv)
        tm = math.exp(e0 - am * am * inv)
        total += tp + tm
        big = tp if tp > tm else tm
        if big < rel_tol * total:
            break
        t += 1.0
        if t > 1e7:
            break
    return math.exp(-e0) * total


def _draw(sigma, center, lo, hi, u):
    """Inverse-CDF draw from the integer Gaussian restricted to [lo, hi]."""
    inv = 1.0 / (2.0 * sigma * sigma)
    kstar = math.floor(center + 0.5)
    if kstar < lo:
        kstar = lo
    elif kstar > hi:
        kstar = hi
    d = kstar - center
    estar = d * d * inv
    total = 0.0
    k = lo
    while k <= hi:
        d = k - center
        total += math.exp(estar - d * d * inv)
        k += 1
    thr = u * total
    cum = 0.0
    k = lo
    while k < hi:
        d = k - center
        cum += math.exp(estar - d * d * inv)
        if cum >= thr:
            return k
        k += 1
    return hi


def dgauss_draw(sigma, center, lo, hi, u):
    return _draw(float(sigma), float(center), int(lo), int(hi), float(u))


def dgauss_draw_many(sigma, center, lo, hi, us):
    sigma = float(sigma)
    center = float(center)
    lo = int(lo)
    hi = int(hi)
    out = np.empty(len(us), dtype=np.int64)
    for i, u in enumerate(us):
        out[i] = _draw(sigma, center, lo, hi, float(u))
    return out


def _pick_site(scan_cdf, u):
    n = len(scan_cdf)
    for i in range(n - 1):
        if u < scan_cdf[i]:
            return i
    return n - 1


def run_univariate(cols, norms2, sigma, scan_cdf, alph_mode, alph_lo, alph_hi,
                   tail, mwg, x0, res0, iterations, burn_in, thin,
                   checkpoint_steps, stream):
    """Single-site Gibbs / Metropolis-within-Gibbs chain.

    cols[i] is the i-th basis column; res tracks B x - c incrementally.
    Returns a dict with the emitted samples, per-site acceptance counters and
    (when checkpoint_steps > 0) the running-minimum distance trace.
    """
    n = len(x0)
    cols_l = [[float(v) for v in cols[i]] for i in range(n)]
    norms2_l = [float(v) for v in norms2]
    cdf_l = [float(v) for v in scan_cdf]
    mode_l = [int(v) for v in alph_mode]
    lo_l = [int(v) for v in alph_lo]
    hi_l = [int(v) for v in alph_hi]
    sigma = float(sigma)
    tail = float(tail)

    x = [int(v) for v in x0]
    res = [float(v) for v in res0]
    d2 = 0.0
    for k in range(n):
        d2 += res[k] * res[k]

    nsamp = 0 if iterations <= burn_in else (iterations - burn_in) // thin
    samples = np.empty((nsamp, n), dtype=np.int64)
    attempts = np.zeros(n, dtype=np.int64)
    accepts = np.zeros(n, dtype=np.int64)
    degenerate = np.zeros(n, dtype=np.int64)

    track = checkpoint_steps > 0
    ncp = iterations // checkpoint_steps if track else 0
    trace = np.empty(ncp, dtype=np.float64)
    cp_best = np.empty((ncp, n), dtype=np.int64)
    best_d2 = d2
    best_x = list(x)

    wrote = 0
    for t in range(1, iterations + 1):
        u = stream.next()
        i = _pick_site(cdf_l, u)
        bi = cols_l[i]
        nb2 = norms2_l[i]
        dot_bres = 0.0
        for k in range(n):
            dot_bres += bi[k] * res[k]
        mu = x[i] - dot_bres / nb2
        sig_c = sigma / math.sqrt(nb2)
        if mode_l[i] == 1:
            lo = lo_l[i]
            hi = hi_l[i]
        else:
            lo = math.ceil(mu - tail * sig_c)
            hi = math.floor(mu + tail * sig_c)
            if lo > hi:
                lo = hi = math.floor(mu + 0.5)
        inv = 1.0 / (2.0 * sig_c * sig_c)
        kstar = math.floor(mu + 0.5)
        if kstar < lo:
            kstar = lo
        elif kstar > hi:
            kstar = hi
        d = kstar - mu
        estar = d * d * inv

        xcur = x[i]
        total = 0.0
        wcur = 0.0
        k = lo
        while k <= hi:
            d = k - mu
            w = math.exp(estar - d * d * inv)
            total += w
            if k == xcur:
                wcur = w
            k += 1

        moved = False
        if not mwg:
            attempts[i] += 1
            accepts[i] += 1
            u2 = stream.next()
            thr = u2 * total
            cum = 0.0
            knew = hi
            k = lo
            while k < hi:
                d = k - mu
                cum += math.exp(estar - d * d * inv)
                if cum >= thr:
                    knew = k
                    break
                k += 1
            moved = knew != xcur
        else:
            dcur = wcur / total if lo <= xcur <= hi else 0.0
            one_minus = 1.0 - dcur
            rest = total - wcur
            if one_minus < 1e-300 or rest <= 0.0:
                degenerate[i] += 1
                knew = xcur
            else:
                attempts[i] += 1
                u2 = stream.next()
                thr = u2 * rest
                cum = 0.0
                knew = hi if hi != xcur else hi - 1
                k = lo
                while k <= hi:
                    if k != xcur:
                        d = k - mu
                        cum += math.exp(estar - d * d * inv)
                        if cum >= thr:
                            knew = k
                            break
                    k += 1
                d = knew - mu
                wnew = math.exp(estar - d * d * inv)
                den = 1.0 - wnew / total
                alpha = 1.0 if den <= 0.0 else min(1.0, one_minus / den)
                u3 = stream.next()
                if u3 <= alpha:
                    accepts[i] += 1
                    moved = knew != xcur
                else:
                    knew = xcur

        if moved:
            delta = float(knew - xcur)
            d2 += 2.0 * delta * dot_bres + delta * delta * nb2
            for k in range(n):
                res[k] += delta * bi[k]
            x[i] = knew
            if track and d2 < best_d2:
                best_d2 = d2
                best_x = list(x)

        if t > burn_in and (t - burn_in) % thin == 0 and wrote < nsamp:
            for k in range(n):
                samples[wrote, k] = x[k]
            wrote += 1
        if track and t % checkpoint_steps == 0:
            j = t // checkpoint_steps - 1
            if j < ncp:
                trace[j] = best_d2
                for k in range(n):
                    cp_best[j, k] = best_x[k]

    # refresh the residual norm to shed incremental drift
    d2 = 0.0
    for k in range(n):
        d2 += res[k] * res[k]
    return {
        "samples": samples,
        "final_x": np.array(x, dtype=np.int64),
        "final_res": np.array(res, dtype=np.float64),
        "final_d2": d2,
        "attempts": attempts,
        "accepts": accepts,
        "degenerate": degenerate,
        "best_x": np.array(best_x, dtype=np.int64),
        "best_d2": best_d2,
        "trace": trace,
        "cp_best": cp_best,
    }


def gk_block_draw(r, cprime, z, m, sigma, tail, retry_cap, rel_tol,
                  alph_mode, alph_lo, alph_hi, denoms, stream):
    """One accepted block draw for the blocked (Gibbs-Klein) kernel.

    z holds the permuted coefficients; entries m..n-1 are the conditioning
    context and entries 0..m-1 are overwritten with the accepted block.
    Returns (status, xi_offsets, accept_prob, rejections); status 1 means the
    retry cap was exhausted (z is then left in an undefined state).
    """
    n = len(z)
    r_l = [[float(v) for v in r[i]] for i in range(n)]
    cp_l = [float(v) for v in cprime]
    mode_l = [int(v) for v in alph_mode]
    lo_l = [int(v) for v in alph_lo]
    hi_l = [int(v) for v in alph_hi]
    den_l = [float(v) for v in denoms]
    sigma = float(sigma)
    tail = float(tail)
    rel_tol = float(rel_tol)

    z_l = [int(v) for v in z]
    xi = np.empty(m, dtype=np.float64)
    rejections = 0
    while True:
        num = 1.0
        for lev in range(m - 1, -1, -1):
            rlev = r_l[lev]
            rii = rlev[lev]
            acc = cp_l[lev]
            for j in range(lev + 1, n):
                acc -= rlev[j] * z_l[j]
            zt = acc / rii
            sig_i = sigma / rii
            if mode_l[lev] == 1:
                lo = lo_l[lev]
                hi = hi_l[lev]
                inv = 1.0 / (2.0 * sig_i * sig_i)
                nsum = 0.0
                k = lo
                while k <= hi:
                    d = k - zt
                    nsum += math.exp(-(d * d * inv))
                    k += 1
                num *= nsum / den_l[lev]
            else:
                lo = math.ceil(zt - tail * sig_i)
                hi = math.floor(zt + tail * sig_i)
                if lo > hi:
                    lo = hi = math.floor(zt + 0.5)
                num *= theta_sum(sigma, rii, rii * zt, rel_tol) / den_l[lev]
            u = stream.next()
            z_l[lev] = _draw(sig_i, zt, lo, hi, u)
            xi[lev] = -rii * zt
        alpha = num if num < 1.0 else 1.0
        u_acc = stream.next()
        if u_acc <= alpha:
            for k in range(n):
                z[k] = z_l[k]
            return 0, xi, alpha, rejections
        rejections += 1
        if rejections >= retry_cap:
            return 1, xi, alpha, rejections
