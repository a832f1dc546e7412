"""Eigenvalues of small complex matrices: Householder Hessenberg reduction
followed by single-shift complex QR with Wilkinson shifts and deflation.

Plain Python complex arithmetic on nested lists; for d ≤ 8 this beats numpy's
per-call overhead. ``_ckernels.pyx`` carries a line-for-line C port.
"""

from __future__ import annotations

import math

from .errors import ConvergenceError

EPS = 2.220446049250313e-16
MAX_SWEEPS_PER_EIGENVALUE = 100


def _csqrt(z: complex) -> complex:
    x, y = z.real, z.imag
    r = math.hypot(x, y)
    if r == 0.0:
        return 0j
    if x >= 0.0:
        a = math.sqrt(0.5 * (r + x))
        return complex(a, y / (2.0 * a))
    b = math.sqrt(0.5 * (r - x))
    if y < 0.0:
        b = -b
    return complex(y / (2.0 * b), b)


def hessenberg(A: list[list[complex]]) -> list[list[complex]]:
    """Reduce ``A`` (modified in place) to upper Hessenberg form by unitary similarity."""
    n = len(A)
    for k in range(n - 2):
        x = [A[i][k] for i in range(k + 1, n)]
        alpha = math.sqrt(sum(abs(t) ** 2 for t in x))
        if alpha == 0.0:
            continue
        x0 = x[0]
        phase = x0 / abs(x0) if x0 != 0 else 1.0
        v = list(x)
        v[0] = x0 + phase * alpha
        vn2 = sum(abs(t) ** 2 for t in v)
        if vn2 == 0.0:
            continue
        m = len(v)
        f = 2.0 / vn2
        for j in range(n):
            s = 0j
            for i in range(m):
                s += v[i].conjugate() * A[k + 1 + i][j]
            s *= f
            for i in range(m):
                A[k + 1 + i][j] -= v[i] * s
        for i in range(n):
            row = A[i]
            s = 0j
            for j in range(m):
                s += row[k + 1 + j] * v[j]
            s *= f
            for j in range(m):
                row[k + 1 + j] -= s * v[j].conjugate()
        for i in range(k + 2, n):
            A[i][k] = 0j
    return A


def eigvals(M) -> list[complex]:
    """All eigenvalues of a square matrix, unordered."""
    H = [[complex(M[i][j]) for j in range(len(M))] for i in range(len(M))]
    n = len(H)
    if n == 0:
        return []
    for row in H:
        for z in row:
            if not (math.isfinite(z.real) and math.isfinite(z.imag)):
                raise ConvergenceError("non-finite matrix entry")
    hessenberg(H)
    scale = max(sum(abs(z) for z in row) for row in H) or 1.0
    eig = [0j] * n
    hi = n - 1
    its = 0
    while hi >= 0:
        if hi == 0:
            eig[0] = H[0][0]
            break
        l = hi
        while l > 0:
            s = abs(H[l - 1][l - 1]) + abs(H[l][l])
            if s == 0.0:
                s = scale
            if abs(H[l][l - 1]) <= EPS * s:
                H[l][l - 1] = 0j
                break
            l -= 1
        if l == hi:
            eig[hi] = H[hi][hi]
            hi -= 1
            its = 0
            continue
        its += 1
        if its > MAX_SWEEPS_PER_EIGENVALUE:
            raise ConvergenceError(f"QR iteration did not converge for a {n}x{n} matrix")
        if its % 10 == 0:
            mu = H[hi][hi] + abs(H[hi][hi - 1])
        else:
            a, b = H[hi - 1][hi - 1], H[hi - 1][hi]
            c, d = H[hi][hi - 1], H[hi][hi]
            half = 0.5 * (a - d)
            disc = _csqrt(half * half + b * c)
            m1 = 0.5 * (a + d) + disc
            m2 = 0.5 * (a + d) - disc
            mu = m1 if abs(m1 - d) < abs(m2 - d) else m2
        for i in range(l, hi + 1):
            H[i][i] -= mu
        rots = []
        for k in range(l, hi):
            a, b = H[k][k], H[k + 1][k]
            r = math.hypot(abs(a), abs(b))
            if r == 0.0:
                c, s = 1.0 + 0j, 0j
            else:
                c, s = a / r, b / r
            cc, sc = c.conjugate(), s.conjugate()
            rk, rk1 = H[k], H[k + 1]
            for j in range(k, hi + 1):
                x, y = rk[j], rk1[j]
                rk[j] = cc * x + sc * y
                rk1[j] = -s * x + c * y
            rots.append((c, s))
        for k, (c, s) in zip(range(l, hi), rots):
            cc, sc = c.conjugate(), s.conjugate()
            for i in range(l, min(k + 2, hi) + 1):
                row = H[i]
                x, y = row[k], row[k + 1]
                row[k] = x * c + y * s
                row[k + 1] = -x * sc + y * cc
        for i in range(l, hi + 1):
            H[i][i] += mu
    return eig


def eigvals_sorted(M) -> list[complex]:
    """Eigenvalues ordered by decreasing modulus (ties keep solver order)."""
    return sorted(eigvals(M), key=lambda z: -abs(z))
