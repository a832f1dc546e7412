# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Same contracts as ``_pykernels``; loops run without the GIL."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, hypot, isfinite, frexp, ldexp

from .errors import ConvergenceError, RankCollapse

ctypedef double complex cplx

cdef enum:
    DMAX = 8
cdef double EPS = 2.220446049250313e-16
cdef double RANK_FLOOR = 1e-300
cdef int MAX_SWEEPS = 100


cdef inline double cabs_(cplx z) noexcept nogil:
    return hypot(z.real, z.imag)


cdef inline double cabs2(cplx z) noexcept nogil:
    return z.real * z.real + z.imag * z.imag


cdef inline cplx conj_(cplx z) noexcept nogil:
    return z.real - 1j * z.imag


cdef inline cplx csqrt_(cplx z) noexcept nogil:
    cdef double x = z.real, y = z.imag, r = hypot(x, y), a, b
    if r == 0.0:
        return 0.0
    if x >= 0.0:
        a = sqrt(0.5 * (r + x))
        return a + 1j * (y / (2.0 * a))
    b = sqrt(0.5 * (r - x))
    if y < 0.0:
        b = -b
    return (y / (2.0 * b)) + 1j * b


def _check_d(Py_ssize_t d):
    if d > DMAX or d < 1:
        raise ValueError(f"compiled kernels support 1 <= d <= {DMAX}, got {d}")


cdef double LOG2 = 0.6931471805599453
cdef double FLUSH_HI = 1e200
cdef double FLUSH_LO = 1e-200


cdef void _products_d2(cplx[:, :, :, ::1] gens, Py_ssize_t[:, ::1] slots, Py_ssize_t[::1] ck,
                       cplx[:, :, :, ::1] mats, double[:, ::1] logs,
                       double[:, :, ::1] ckl) noexcept nogil:
    """2x2 specialisation of the scaled product loop, in real arithmetic.

    Each factor is rescaled by an exact power of two that brings the
    Frobenius norm into [2^-1/2, 2^1/2); the exponents are summed as integers
    and converted to a logarithm only at checkpoints and at the end.
    """
    cdef Py_ssize_t W = slots.shape[0], L = slots.shape[1], P = gens.shape[1], C = ck.shape[0]
    cdef Py_ssize_t w, p, j, s, step, cc
    cdef double ar, ai, br, bi, cr, ci, dr, di
    cdef double gar, gai, gbr, gbi, gcr, gci, gdr, gdi
    cdef double nar, nai, nbr, nbi, ncr, nci, ndr, ndi
    cdef double n2, f, nrm
    cdef long K
    cdef int e
    for w in range(W):
        for p in range(P):
            ar, ai, br, bi, cr, ci, dr, di = 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0
            K = 0
            step = 0
            for j in range(L - 1, -1, -1):
                step += 1
                s = slots[w, j]
                if s >= 0:
                    gar, gai = gens[s, p, 0, 0].real, gens[s, p, 0, 0].imag
                    gbr, gbi = gens[s, p, 0, 1].real, gens[s, p, 0, 1].imag
                    gcr, gci = gens[s, p, 1, 0].real, gens[s, p, 1, 0].imag
                    gdr, gdi = gens[s, p, 1, 1].real, gens[s, p, 1, 1].imag
                    nar = gar * ar - gai * ai + gbr * cr - gbi * ci
                    nai = gar * ai + gai * ar + gbr * ci + gbi * cr
                    nbr = gar * br - gai * bi + gbr * dr - gbi * di
                    nbi = gar * bi + gai * br + gbr * di + gbi * dr
                    ncr = gcr * ar - gci * ai + gdr * cr - gdi * ci
                    nci = gcr * ai + gci * ar + gdr * ci + gdi * cr
                    ndr = gcr * br - gci * bi + gdr * dr - gdi * di
                    ndi = gcr * bi + gci * br + gdr * di + gdi * dr
                    n2 = (nar * nar + nai * nai + nbr * nbr + nbi * nbi
                          + ncr * ncr + nci * nci + ndr * ndr + ndi * ndi)
                    frexp(n2, &e)
                    e = e >> 1
                    f = ldexp(1.0, -e)
                    K += e
                    ar, ai, br, bi = nar * f, nai * f, nbr * f, nbi * f
                    cr, ci, dr, di = ncr * f, nci * f, ndr * f, ndi * f
                for cc in range(C):
                    if ck[cc] == step:
                        n2 = ar * ar + ai * ai + br * br + bi * bi + cr * cr + ci * ci + dr * dr + di * di
                        ckl[w, p, cc] = K * LOG2 + 0.5 * log(n2)
            n2 = ar * ar + ai * ai + br * br + bi * bi + cr * cr + ci * ci + dr * dr + di * di
            nrm = sqrt(n2)
            f = 1.0 / nrm
            mats[w, p, 0, 0] = ar * f + 1j * (ai * f)
            mats[w, p, 0, 1] = br * f + 1j * (bi * f)
            mats[w, p, 1, 0] = cr * f + 1j * (ci * f)
            mats[w, p, 1, 1] = dr * f + 1j * (di * f)
            logs[w, p] = K * LOG2 + log(nrm)


def scaled_products(cplx[:, :, :, ::1] gens, Py_ssize_t[:, ::1] slots, checkpoints=()):
    cdef Py_ssize_t S = gens.shape[0], P = gens.shape[1], d = gens.shape[2]
    cdef Py_ssize_t W = slots.shape[0], L = slots.shape[1]
    _check_d(d)
    ck_np = np.ascontiguousarray(checkpoints, dtype=np.intp).reshape(-1)
    cdef Py_ssize_t[::1] ck = ck_np
    cdef Py_ssize_t C = ck.shape[0]
    mats_np = np.zeros((W, P, d, d), dtype=complex)
    logs_np = np.zeros((W, P))
    ckl_np = np.zeros((W, P, C))
    cdef cplx[:, :, :, ::1] mats = mats_np
    cdef double[:, ::1] logs = logs_np
    cdef double[:, :, ::1] ckl = ckl_np
    cdef cplx acc[DMAX * DMAX]
    cdef cplx tmp[DMAX * DMAX]
    cdef Py_ssize_t w, p, j, s, r, c, q, step, cc
    cdef double ls, n2, nrm, inv, pacc
    cdef cplx t
    if d == 2:
        with nogil:
            _products_d2(gens, slots, ck, mats, logs, ckl)
        return mats_np, logs_np, ckl_np
    with nogil:
        for w in range(W):
            for p in range(P):
                for r in range(d * d):
                    acc[r] = 0
                for r in range(d):
                    acc[r * d + r] = 1
                ls = 0.0
                pacc = 1.0
                step = 0
                for j in range(L - 1, -1, -1):
                    step += 1
                    s = slots[w, j]
                    if s >= 0:
                        n2 = 0.0
                        for r in range(d):
                            for c in range(d):
                                t = 0
                                for q in range(d):
                                    t = t + gens[s, p, r, q] * acc[q * d + c]
                                tmp[r * d + c] = t
                                n2 = n2 + cabs2(t)
                        nrm = sqrt(n2)
                        inv = 1.0 / nrm
                        for r in range(d * d):
                            acc[r] = tmp[r] * inv
                        pacc = pacc * nrm
                        if pacc > FLUSH_HI or pacc < FLUSH_LO:
                            ls = ls + log(pacc)
                            pacc = 1.0
                    for cc in range(C):
                        if ck[cc] == step:
                            ls = ls + log(pacc)
                            pacc = 1.0
                            ckl[w, p, cc] = ls
                for r in range(d):
                    for c in range(d):
                        mats[w, p, r, c] = acc[r * d + c]
                logs[w, p] = ls + log(pacc)
    return mats_np, logs_np, ckl_np


def scaled_vector_products(cplx[:, :, :, ::1] gens, Py_ssize_t[:, ::1] slots, v0):
    cdef Py_ssize_t S = gens.shape[0], P = gens.shape[1], d = gens.shape[2]
    cdef Py_ssize_t W = slots.shape[0], L = slots.shape[1]
    _check_d(d)
    v0_np = np.ascontiguousarray(v0, dtype=complex)
    cdef cplx[::1] v0v = v0_np
    vecs_np = np.zeros((W, P, d), dtype=complex)
    logs_np = np.zeros((W, P))
    cdef cplx[:, :, ::1] vecs = vecs_np
    cdef double[:, ::1] logs = logs_np
    cdef cplx v[DMAX]
    cdef cplx tmp[DMAX]
    cdef Py_ssize_t w, p, j, s, r, q
    cdef double ls, n2, nrm
    cdef cplx t
    with nogil:
        for w in range(W):
            for p in range(P):
                n2 = 0.0
                for r in range(d):
                    n2 = n2 + cabs2(v0v[r])
                nrm = sqrt(n2)
                for r in range(d):
                    v[r] = v0v[r] / nrm
                ls = log(nrm)
                for j in range(L - 1, -1, -1):
                    s = slots[w, j]
                    if s < 0:
                        continue
                    n2 = 0.0
                    for r in range(d):
                        t = 0
                        for q in range(d):
                            t = t + gens[s, p, r, q] * v[q]
                        tmp[r] = t
                        n2 = n2 + cabs2(t)
                    nrm = sqrt(n2)
                    for r in range(d):
                        v[r] = tmp[r] / nrm
                    ls = ls + log(nrm)
                for r in range(d):
                    vecs[w, p, r] = v[r]
                logs[w, p] = ls
    return vecs_np, logs_np


def qr_exponents(cplx[:, :, :, ::1] gens, Py_ssize_t[:, ::1] slots, Py_ssize_t k):
    cdef Py_ssize_t S = gens.shape[0], P = gens.shape[1], d = gens.shape[2]
    cdef Py_ssize_t W = slots.shape[0], L = slots.shape[1]
    _check_d(d)
    if k < 1 or k > d:
        raise ValueError("need 1 <= k <= d")
    sums_np = np.zeros((W, P, k))
    cdef double[:, :, ::1] sums = sums_np
    cdef cplx Q[DMAX * DMAX]
    cdef cplx Y[DMAX * DMAX]
    cdef Py_ssize_t w, p, j, s, r, c, q, i, jj, rep
    cdef cplx t, proj
    cdef double n2, nrm
    cdef int collapsed = 0
    with nogil:
        for w in range(W):
            for p in range(P):
                for r in range(d):
                    for c in range(k):
                        Q[r * k + c] = 1.0 if r == c else 0.0
                for j in range(L - 1, -1, -1):
                    s = slots[w, j]
                    if s < 0:
                        continue
                    for r in range(d):
                        for c in range(k):
                            t = 0
                            for q in range(d):
                                t = t + gens[s, p, r, q] * Q[q * k + c]
                            Y[r * k + c] = t
                    # classical Gram-Schmidt, two passes
                    for i in range(k):
                        for rep in range(2):
                            for jj in range(i):
                                proj = 0
                                for r in range(d):
                                    proj = proj + conj_(Y[r * k + jj]) * Y[r * k + i]
                                for r in range(d):
                                    Y[r * k + i] = Y[r * k + i] - proj * Y[r * k + jj]
                        n2 = 0.0
                        for r in range(d):
                            n2 = n2 + cabs2(Y[r * k + i])
                        nrm = sqrt(n2)
                        if nrm < RANK_FLOOR:
                            collapsed = 1
                            nrm = RANK_FLOOR
                        for r in range(d):
                            Y[r * k + i] = Y[r * k + i] / nrm
                        sums[w, p, i] += log(nrm)
                    for r in range(d * k):
                        Q[r] = Y[r]
    if collapsed:
        raise RankCollapse("frame collapsed: |R_ii| below 1e-300")
    return sums_np


cdef int _eig_one(cplx* A, Py_ssize_t n, cplx* eig) noexcept nogil:
    """Hessenberg + shifted QR on the n x n row-major array A (destroyed).
    Returns 0 on success, 1 on non-convergence, 2 on non-finite input."""
    cdef Py_ssize_t k, i, j, m, l, hi, its
    cdef double alpha, vn2, f, scale, rsum, s_, rr
    cdef cplx x0, phase, s, mu, a, b, c, dd, half, disc, m1, m2, cs, sn, cc, sc, x, y
    cdef cplx v[DMAX]
    cdef cplx rc[DMAX]
    cdef cplx rs[DMAX]
    for i in range(n * n):
        if not (isfinite(A[i].real) and isfinite(A[i].imag)):
            return 2
    # Householder reduction
    for k in range(n - 2):
        alpha = 0.0
        m = n - k - 1
        for i in range(m):
            v[i] = A[(k + 1 + i) * n + k]
            alpha += cabs2(v[i])
        alpha = sqrt(alpha)
        if alpha == 0.0:
            continue
        x0 = v[0]
        if cabs_(x0) != 0.0:
            phase = x0 / cabs_(x0)
        else:
            phase = 1.0
        v[0] = x0 + phase * alpha
        vn2 = 0.0
        for i in range(m):
            vn2 += cabs2(v[i])
        if vn2 == 0.0:
            continue
        f = 2.0 / vn2
        for j in range(n):
            s = 0
            for i in range(m):
                s = s + conj_(v[i]) * A[(k + 1 + i) * n + j]
            s = s * f
            for i in range(m):
                A[(k + 1 + i) * n + j] = A[(k + 1 + i) * n + j] - v[i] * s
        for i in range(n):
            s = 0
            for j in range(m):
                s = s + A[i * n + k + 1 + j] * v[j]
            s = s * f
            for j in range(m):
                A[i * n + k + 1 + j] = A[i * n + k + 1 + j] - s * conj_(v[j])
        for i in range(k + 2, n):
            A[i * n + k] = 0
    scale = 0.0
    for i in range(n):
        rsum = 0.0
        for j in range(n):
            rsum += cabs_(A[i * n + j])
        if rsum > scale:
            scale = rsum
    if scale == 0.0:
        scale = 1.0
    hi = n - 1
    its = 0
    while hi >= 0:
        if hi == 0:
            eig[0] = A[0]
            break
        l = hi
        while l > 0:
            s_ = cabs_(A[(l - 1) * n + l - 1]) + cabs_(A[l * n + l])
            if s_ == 0.0:
                s_ = scale
            if cabs_(A[l * n + l - 1]) <= EPS * s_:
                A[l * n + l - 1] = 0
                break
            l -= 1
        if l == hi:
            eig[hi] = A[hi * n + hi]
            hi -= 1
            its = 0
            continue
        its += 1
        if its > MAX_SWEEPS:
            return 1
        if its % 10 == 0:
            mu = A[hi * n + hi] + cabs_(A[hi * n + hi - 1])
        else:
            a = A[(hi - 1) * n + hi - 1]
            b = A[(hi - 1) * n + hi]
            c = A[hi * n + hi - 1]
            dd = A[hi * n + hi]
            half = 0.5 * (a - dd)
            disc = csqrt_(half * half + b * c)
            m1 = 0.5 * (a + dd) + disc
            m2 = 0.5 * (a + dd) - disc
            if cabs_(m1 - dd) < cabs_(m2 - dd):
                mu = m1
            else:
                mu = m2
        for i in range(l, hi + 1):
            A[i * n + i] = A[i * n + i] - mu
        for k in range(l, hi):
            a = A[k * n + k]
            b = A[(k + 1) * n + k]
            rr = hypot(cabs_(a), cabs_(b))
            if rr == 0.0:
                cs = 1.0
                sn = 0.0
            else:
                cs = a / rr
                sn = b / rr
            cc = conj_(cs)
            sc = conj_(sn)
            for j in range(k, hi + 1):
                x = A[k * n + j]
                y = A[(k + 1) * n + j]
                A[k * n + j] = cc * x + sc * y
                A[(k + 1) * n + j] = -sn * x + cs * y
            rc[k] = cs
            rs[k] = sn
        for k in range(l, hi):
            cs = rc[k]
            sn = rs[k]
            cc = conj_(cs)
            sc = conj_(sn)
            for i in range(l, min(k + 2, hi) + 1):
                x = A[i * n + k]
                y = A[i * n + k + 1]
                A[i * n + k] = x * cs + y * sn
                A[i * n + k + 1] = -x * sc + y * cc
        for i in range(l, hi + 1):
            A[i * n + i] = A[i * n + i] + mu
    return 0


def eigvals_batch(mats):
    mats_np = np.ascontiguousarray(mats, dtype=complex)
    cdef Py_ssize_t N = mats_np.shape[0], d = mats_np.shape[1]
    _check_d(d)
    cdef cplx[:, :, ::1] M = mats_np
    out_np = np.zeros((N, d), dtype=complex)
    cdef cplx[:, ::1] out = out_np
    cdef cplx A[DMAX * DMAX]
    cdef cplx e[DMAX]
    cdef cplx t
    cdef Py_ssize_t i, r, c, a, b
    cdef int status = 0, st
    with nogil:
        for i in range(N):
            for r in range(d):
                for c in range(d):
                    A[r * d + c] = M[i, r, c]
            st = _eig_one(A, d, e)
            if st != 0:
                status = st
                continue
            # insertion sort by decreasing modulus (stable)
            for a in range(1, d):
                t = e[a]
                b = a - 1
                while b >= 0 and cabs_(e[b]) < cabs_(t):
                    e[b + 1] = e[b]
                    b -= 1
                e[b + 1] = t
            for r in range(d):
                out[i, r] = e[r]
    if status == 1:
        raise ConvergenceError(f"QR iteration did not converge for a {d}x{d} matrix")
    if status == 2:
        raise ConvergenceError("non-finite matrix entry")
    return out_np


def projective_chain(gens, slots, x0, Py_ssize_t burn, Py_ssize_t thin, Py_ssize_t count):
    gens_np = np.ascontiguousarray(gens, dtype=complex)
    slots_np = np.ascontiguousarray(slots, dtype=np.intp)
    cdef cplx[:, :, ::1] G = gens_np
    cdef Py_ssize_t[:, ::1] sl = slots_np
    cdef Py_ssize_t d = G.shape[1], Cn = sl.shape[0], T = sl.shape[1]
    _check_d(d)
    x0_np = np.ascontiguousarray(x0, dtype=complex)
    cdef cplx[::1] xv = x0_np
    out_np = np.zeros((Cn, count, d), dtype=complex)
    cdef cplx[:, :, ::1] out = out_np
    cdef cplx x[DMAX]
    cdef cplx tmp[DMAX]
    cdef Py_ssize_t ch, t, r, q, s, rec
    cdef double n2, nrm
    cdef cplx acc
    with nogil:
        for ch in range(Cn):
            n2 = 0.0
            for r in range(d):
                n2 += cabs2(xv[r])
            nrm = sqrt(n2)
            for r in range(d):
                x[r] = xv[r] / nrm
            rec = 0
            for t in range(1, T + 1):
                s = sl[ch, t - 1]
                n2 = 0.0
                for r in range(d):
                    acc = 0
                    for q in range(d):
                        acc = acc + G[s, r, q] * x[q]
                    tmp[r] = acc
                    n2 += cabs2(acc)
                nrm = sqrt(n2)
                for r in range(d):
                    x[r] = tmp[r] / nrm
                if t >= burn and (t - burn) % thin == 0 and rec < count:
                    for r in range(d):
                        out[ch, rec, r] = x[r]
                    rec += 1
    return out_np
