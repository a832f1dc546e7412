"""numpy implementation of the hot kernels (fallback for ``_ckernels``).

All word kernels take ``gens`` of shape ``(S, P, d, d)`` (slot images at P
parameters) and ``slots`` of shape ``(W, L)`` (``-1`` = identity). The product
of a row is ``g[s0] g[s1] ... g[s_{L-1}]``; it is accumulated from the right,
i.e. in the time order of a left random walk.
"""

from __future__ import annotations

import numpy as np

from . import _eigen
from .errors import RankCollapse

RANK_FLOOR = 1e-300


def scaled_products(gens, slots, checkpoints=()):
    """Unit-Frobenius products and their accumulated log-scales.

    Returns ``(mats (W,P,d,d), logs (W,P), ck_logs (W,P,C))`` where
    ``ck_logs[..., c]`` is the log-scale after the last ``checkpoints[c]``
    letters have been applied.
    """
    S, P, d, _ = gens.shape
    W, L = slots.shape
    acc = np.broadcast_to(np.eye(d, dtype=complex), (W, P, d, d)).copy()
    logs = np.zeros((W, P))
    ck = np.asarray(checkpoints, dtype=np.intp)
    ck_logs = np.zeros((W, P, ck.size))
    for c in np.flatnonzero(ck == 0):
        ck_logs[..., c] = 0.0
    for step, j in enumerate(range(L - 1, -1, -1), start=1):
        s = slots[:, j]
        active = s >= 0
        if active.all():
            acc = gens[s] @ acc
            nrm = np.sqrt(np.einsum("wpij,wpij->wp", acc.real, acc.real)
                          + np.einsum("wpij,wpij->wp", acc.imag, acc.imag))
            acc /= nrm[..., None, None]
            logs += np.log(nrm)
        elif active.any():
            sub = gens[s[active]] @ acc[active]
            nrm = np.linalg.norm(sub, axis=(-2, -1))
            acc[active] = sub / nrm[..., None, None]
            logs[active] += np.log(nrm)
        for c in np.flatnonzero(ck == step):
            ck_logs[..., c] = logs
    return acc, logs, ck_logs


def scaled_vector_products(gens, slots, v0):
    """``M v0`` for each word and parameter, as unit vectors plus log-scales."""
    S, P, d, _ = gens.shape
    W, L = slots.shape
    v = np.broadcast_to(np.asarray(v0, dtype=complex), (W, P, d)).copy()
    nrm = np.linalg.norm(v, axis=-1)
    v /= nrm[..., None]
    logs = np.log(nrm)
    for j in range(L - 1, -1, -1):
        s = slots[:, j]
        active = s >= 0
        if not active.any():
            continue
        sub = np.einsum("wpij,wpj->wpi", gens[s[active]], v[active])
        nrm = np.linalg.norm(sub, axis=-1)
        v[active] = sub / nrm[..., None]
        logs[active] += np.log(nrm)
    return v, logs


def qr_exponents(gens, slots, k):
    """Sums of log|R_ii|, i < k, along each word (QR re-orthonormalised every letter)."""
    S, P, d, _ = gens.shape
    W, L = slots.shape
    Q = np.broadcast_to(np.eye(d, k, dtype=complex), (W, P, d, k)).copy()
    sums = np.zeros((W, P, k))
    for j in range(L - 1, -1, -1):
        s = slots[:, j]
        active = s >= 0
        if not active.any():
            continue
        Y = gens[s[active]] @ Q[active]
        q, r = np.linalg.qr(Y)
        diag = np.abs(np.diagonal(r, axis1=-2, axis2=-1))
        if (diag < RANK_FLOOR).any():
            raise RankCollapse("frame collapsed: |R_ii| below 1e-300")
        Q[active] = q
        sums[active] += np.log(diag)
    return sums


def eigvals_batch(mats):
    """Eigenvalues of ``(N, d, d)`` matrices, sorted by decreasing modulus."""
    mats = np.asarray(mats, dtype=complex)
    N, d, _ = mats.shape
    if d == 2:
        a, b, c, e = mats[:, 0, 0], mats[:, 0, 1], mats[:, 1, 0], mats[:, 1, 1]
        tr = a + e
        det = a * e - b * c
        disc = np.sqrt(tr * tr - 4.0 * det)
        m1 = 0.5 * (tr + disc)
        m2 = 0.5 * (tr - disc)
        swap = np.abs(m2) > np.abs(m1)
        top = np.where(swap, m2, m1)
        with np.errstate(divide="ignore", invalid="ignore"):
            low = np.where(top != 0, det / np.where(top != 0, top, 1.0), 0.0)
        return np.stack([top, low], axis=1)
    out = np.empty((N, d), dtype=complex)
    for i in range(N):
        out[i] = _eigen.eigvals_sorted(mats[i].tolist())
    return out


def projective_chain(gens, slots, x0, burn, thin, count):
    """Run chains x ← g x (normalised); record after ``burn + r*thin`` steps.

    ``gens`` is ``(S, d, d)``, ``slots`` is ``(C, T)`` in time order.
    Returns ``(C, count, d)`` unit vectors.
    """
    C, T = slots.shape
    d = gens.shape[-1]
    x = np.broadcast_to(np.asarray(x0, dtype=complex), (C, d)).copy()
    x /= np.linalg.norm(x, axis=-1, keepdims=True)
    out = np.empty((C, count, d), dtype=complex)
    r = 0
    for t in range(1, T + 1):
        x = np.einsum("cij,cj->ci", gens[slots[:, t - 1]], x)
        x /= np.linalg.norm(x, axis=-1, keepdims=True)
        if t >= burn and (t - burn) % thin == 0 and r < count:
            out[:, r] = x
            r += 1
    return out
