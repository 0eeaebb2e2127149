# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels.

Mirror of ``_pykernels.py``: same uniform-consumption order and the same
float64 operation order, so trajectories are bit-identical across backends.
Keep the two files in sync.
"""

from libc.math cimport ceil, exp, floor, sqrt

import numpy as np

BACKEND_NAME = "compiled"


cdef double _theta(double sigma, double spacing, double offset, double rel_tol) noexcept nogil:
    cdef double inv = 1.0 / (2.0 * sigma * sigma)
    cdef double k0 = floor(-offset / spacing + 0.5)
    cdef double a0 = spacing * k0 + offset
    cdef double e0 = a0 * a0 * inv
    cdef double total = 1.0
    cdef double t = 1.0
    cdef double ap, am, tp, tm, big
    while True:
        ap = spacing * (k0 + t) + offset
        am = spacing * (k0 - t) + offset
        tp = exp(e0 - ap * ap * inv)
        tm = exp(e0 - am * am * inv)
        total += tp + tm
        big = tp if tp > tm else tm
        if big < rel_tol * total:
            break
        t += 1.0
        if t > 1e7:
            break
    return exp(-e0) * total


def theta_sum(double sigma, double spacing, double offset, double rel_tol):
    return _theta(sigma, spacing, offset, rel_tol)


cdef long long _draw(double sigma, double center, long long lo, long long hi, double u) noexcept nogil:
    cdef double inv = 1.0 / (2.0 * sigma * sigma)
    cdef long long kstar = <long long>floor(center + 0.5)
    if kstar < lo:
        kstar = lo
    elif kstar > hi:
        kstar = hi
    cdef double d = kstar - center
    cdef double estar = d * d * inv
    cdef double total = 0.0
    cdef long long k = lo
    while k <= hi:
        d = k - center
        total += exp(estar - d * d * inv)
        k += 1
    cdef double thr = u * total
    cdef double cum = 0.0
    k = lo
    while k < hi:
        d = k - center
        cum += exp(estar - d * d * inv)
        if cum >= thr:
            return k
        k += 1
    return hi


def dgauss_draw(sigma, center, lo, hi, u):
    return _draw(float(sigma), float(center), int(lo), int(hi), float(u))


def dgauss_draw_many(sigma, center, lo, hi, us):
    cdef double sig = float(sigma)
    cdef double cen = float(center)
    cdef long long l = int(lo)
    cdef long long h = int(hi)
    cdef double[::1] uv = np.ascontiguousarray(us, dtype=np.float64)
    cdef Py_ssize_t count = uv.shape[0]
    out = np.empty(count, dtype=np.int64)
    cdef long long[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(count):
            ov[i] = _draw(sig, cen, l, h, uv[i])
    return out


def run_univariate(cols, norms2, double sigma, scan_cdf, alph_mode, alph_lo,
                   alph_hi, double tail, bint mwg, x0, res0,
                   long long iterations, long long burn_in, long long thin,
                   long long checkpoint_steps, stream):
    cdef const double[:, ::1] cols_v = np.ascontiguousarray(cols, dtype=np.float64)
    cdef const double[::1] norms2_v = np.ascontiguousarray(norms2, dtype=np.float64)
    cdef const double[::1] cdf_v = np.ascontiguousarray(scan_cdf, dtype=np.float64)
    cdef const signed char[::1] mode_v = np.ascontiguousarray(alph_mode, dtype=np.int8)
    cdef const long long[::1] lo_v = np.ascontiguousarray(alph_lo, dtype=np.int64)
    cdef const long long[::1] hi_v = np.ascontiguousarray(alph_hi, dtype=np.int64)
    cdef Py_ssize_t n = cols_v.shape[0]

    x_arr = np.array(x0, dtype=np.int64)
    res_arr = np.array(res0, dtype=np.float64)
    cdef long long[::1] x = x_arr
    cdef double[::1] res = res_arr
    cdef double d2 = 0.0
    cdef Py_ssize_t k
    for k in range(n):
        d2 += res[k] * res[k]

    cdef long long nsamp = 0 if iterations <= burn_in else (iterations - burn_in) // thin
    samples = np.empty((nsamp, n), dtype=np.int64)
    attempts = np.zeros(n, dtype=np.int64)
    accepts = np.zeros(n, dtype=np.int64)
    degenerate = np.zeros(n, dtype=np.int64)
    cdef long long[:, ::1] samples_v = samples
    cdef long long[::1] attempts_v = attempts
    cdef long long[::1] accepts_v = accepts
    cdef long long[::1] degenerate_v = degenerate

    cdef bint track = checkpoint_steps > 0
    cdef long long ncp = iterations // checkpoint_steps if track else 0
    trace = np.empty(ncp, dtype=np.float64)
    cp_best = np.empty((ncp, n), dtype=np.int64)
    cdef double[::1] trace_v = trace
    cdef long long[:, ::1] cp_best_v = cp_best
    best_x_arr = x_arr.copy()
    cdef long long[::1] best_x = best_x_arr
    cdef double best_d2 = d2

    # local view of the stream buffer; re-acquired after each refill
    cdef double[::1] buf = stream.buf
    cdef Py_ssize_t pos = stream.pos
    cdef Py_ssize_t bufsize = buf.shape[0]

    cdef long long wrote = 0
    cdef long long t, lo, hi, kstar, xcur, knew, kk, j
    cdef Py_ssize_t i
    cdef double u, u2, u3, dot_bres, mu, sig_c, inv, estar, d, w, total, wcur
    cdef double thr, cum, dcur, one_minus, rest, wnew, den, alpha, delta, nb2
    cdef bint moved

    for t in range(1, iterations + 1):
        if pos >= bufsize:
            stream.refill()
            buf = stream.buf
            pos = 0
            bufsize = buf.shape[0]
        u = buf[pos]
        pos += 1

        i = n - 1
        for k in range(n - 1):
            if u < cdf_v[k]:
                i = k
                break
        nb2 = norms2_v[i]
        dot_bres = 0.0
        for k in range(n):
            dot_bres += cols_v[i, k] * res[k]
        mu = x[i] - dot_bres / nb2
        sig_c = sigma / sqrt(nb2)
        if mode_v[i] == 1:
            lo = lo_v[i]
            hi = hi_v[i]
        else:
            lo = <long long>ceil(mu - tail * sig_c)
            hi = <long long>floor(mu + tail * sig_c)
            if lo > hi:
                lo = <long long>floor(mu + 0.5)
                hi = lo
        inv = 1.0 / (2.0 * sig_c * sig_c)
        kstar = <long long>floor(mu + 0.5)
        if kstar < lo:
            kstar = lo
        elif kstar > hi:
            kstar = hi
        d = kstar - mu
        estar = d * d * inv

        xcur = x[i]
        total = 0.0
        wcur = 0.0
        kk = lo
        while kk <= hi:
            d = kk - mu
            w = exp(estar - d * d * inv)
            total += w
            if kk == xcur:
                wcur = w
            kk += 1

        moved = False
        if not mwg:
            attempts_v[i] += 1
            accepts_v[i] += 1
            if pos >= bufsize:
                stream.refill()
                buf = stream.buf
                pos = 0
                bufsize = buf.shape[0]
            u2 = buf[pos]
            pos += 1
            thr = u2 * total
            cum = 0.0
            knew = hi
            kk = lo
            while kk < hi:
                d = kk - mu
                cum += exp(estar - d * d * inv)
                if cum >= thr:
                    knew = kk
                    break
                kk += 1
            moved = knew != xcur
        else:
            dcur = wcur / total if (lo <= xcur <= hi) else 0.0
            one_minus = 1.0 - dcur
            rest = total - wcur
            if one_minus < 1e-300 or rest <= 0.0:
                degenerate_v[i] += 1
                knew = xcur
            else:
                attempts_v[i] += 1
                if pos >= bufsize:
                    stream.refill()
                    buf = stream.buf
                    pos = 0
                    bufsize = buf.shape[0]
                u2 = buf[pos]
                pos += 1
                thr = u2 * rest
                cum = 0.0
                knew = hi if hi != xcur else hi - 1
                kk = lo
                while kk <= hi:
                    if kk != xcur:
                        d = kk - mu
                        cum += exp(estar - d * d * inv)
                        if cum >= thr:
                            knew = kk
                            break
                    kk += 1
                d = knew - mu
                wnew = exp(estar - d * d * inv)
                den = 1.0 - wnew / total
                if den <= 0.0:
                    alpha = 1.0
                else:
                    alpha = one_minus / den
                    if alpha > 1.0:
                        alpha = 1.0
                if pos >= bufsize:
                    stream.refill()
                    buf = stream.buf
                    pos = 0
                    bufsize = buf.shape[0]
                u3 = buf[pos]
                pos += 1
                if u3 <= alpha:
                    accepts_v[i] += 1
                    moved = knew != xcur
                else:
                    knew = xcur

        if moved:
            delta = <double>(knew - xcur)
            d2 += 2.0 * delta * dot_bres + delta * delta * nb2
            for k in range(n):
                res[k] += delta * cols_v[i, k]
            x[i] = knew
            if track and d2 < best_d2:
                best_d2 = d2
                for k in range(n):
                    best_x[k] = x[k]

        if t > burn_in and (t - burn_in) % thin == 0 and wrote < nsamp:
            for k in range(n):
                samples_v[wrote, k] = x[k]
            wrote += 1
        if track and t % checkpoint_steps == 0:
            j = t // checkpoint_steps - 1
            if j < ncp:
                trace_v[j] = best_d2
                for k in range(n):
                    cp_best_v[j, k] = best_x[k]

    stream.pos = pos
    d2 = 0.0
    for k in range(n):
        d2 += res[k] * res[k]
    return {
        "samples": samples,
        "final_x": x_arr,
        "final_res": res_arr,
        "final_d2": d2,
        "attempts": attempts,
        "accepts": accepts,
        "degenerate": degenerate,
        "best_x": best_x_arr,
        "best_d2": best_d2,
        "trace": trace,
        "cp_best": cp_best,
    }


def gk_block_draw(r, cprime, z, long long m, double sigma, double tail,
                  long long retry_cap, double rel_tol, alph_mode, alph_lo,
                  alph_hi, denoms, stream):
    cdef const double[:, ::1] r_v = np.ascontiguousarray(r, dtype=np.float64)
    cdef const double[::1] cp_v = np.ascontiguousarray(cprime, dtype=np.float64)
    cdef const signed char[::1] mode_v = np.ascontiguousarray(alph_mode, dtype=np.int8)
    cdef const long long[::1] lo_v = np.ascontiguousarray(alph_lo, dtype=np.int64)
    cdef const long long[::1] hi_v = np.ascontiguousarray(alph_hi, dtype=np.int64)
    cdef const double[::1] den_v = np.ascontiguousarray(denoms, dtype=np.float64)
    cdef Py_ssize_t n = r_v.shape[0]

    z_arr = np.array(z, dtype=np.int64)
    cdef long long[::1] z_v = z_arr
    xi = np.empty(m, dtype=np.float64)
    cdef double[::1] xi_v = xi

    cdef double[::1] buf = stream.buf
    cdef Py_ssize_t pos = stream.pos
    cdef Py_ssize_t bufsize = buf.shape[0]

    cdef long long rejections = 0
    cdef long long lev, j, lo, hi, kk
    cdef double num, rii, acc, zt, sig_i, inv, nsum, d, u, u_acc, alpha

    while True:
        num = 1.0
        for lev in range(m - 1, -1, -1):
            rii = r_v[lev, lev]
            acc = cp_v[lev]
            for j in range(lev + 1, n):
                acc -= r_v[lev, j] * z_v[j]
            zt = acc / rii
            sig_i = sigma / rii
            if mode_v[lev] == 1:
                lo = lo_v[lev]
                hi = hi_v[lev]
                inv = 1.0 / (2.0 * sig_i * sig_i)
                nsum = 0.0
                kk = lo
                while kk <= hi:
                    d = kk - zt
                    nsum += exp(-(d * d * inv))
                    kk += 1
                num *= nsum / den_v[lev]
            else:
                lo = <long long>ceil(zt - tail * sig_i)
                hi = <long long>floor(zt + tail * sig_i)
                if lo > hi:
                    lo = <long long>floor(zt + 0.5)
                    hi = lo
                num *= _theta(sigma, rii, rii * zt, rel_tol) / den_v[lev]
            if pos >= bufsize:
                stream.refill()
                buf = stream.buf
                pos = 0
                bufsize = buf.shape[0]
            u = buf[pos]
            pos += 1
            z_v[lev] = _draw(sig_i, zt, lo, hi, u)
            xi_v[lev] = -rii * zt
        alpha = num if num < 1.0 else 1.0
        if pos >= bufsize:
            stream.refill()
            buf = stream.buf
            pos = 0
            bufsize = buf.shape[0]
        u_acc = buf[pos]
        pos += 1
        if u_acc <= alpha:
            stream.pos = pos
            for j in range(n):
                z[j] = z_arr[j]
            return 0, xi, alpha, rejections
        rejections += 1
        if rejections >= retry_cap:
            stream.pos = pos
            return 1, xi, alpha, rejections
