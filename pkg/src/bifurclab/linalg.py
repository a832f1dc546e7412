"""Small dense complex linear algebra: scaled word products, exterior powers,
eigenvalues, QR steps and projective geometry."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _eigen, kernels
from .errors import RankCollapse
from .walk import Word, letters_to_slots

DET_DRIFT_TOL = 1e-6
QR_ORTHO_TOL = 1e-10
DET_MEASURABLE = 1e-6  # |det| of a unit-Frobenius matrix below this is dominated by rounding


@dataclass(frozen=True)
class ScaledProduct:
    """``exp(log_scale) * matrix`` with ``matrix`` of unit Frobenius norm."""

    matrix: np.ndarray
    log_scale: float

    @property
    def log_norm(self) -> float:
        """log of the Frobenius norm of the true product."""
        return self.log_scale + math.log(np.linalg.norm(self.matrix))

    def full(self) -> np.ndarray:
        return math.exp(self.log_scale) * self.matrix


def _renormalize_det(mat: np.ndarray, log_scale: float) -> tuple[np.ndarray, float]:
    """Keep det(true product) = 1 by dividing by det^{1/d} when it drifts.

    Only applied while det of the unit-norm matrix is well above rounding
    level; for ill-conditioned products it is noise and is left alone.
    """
    d = mat.shape[0]
    det = complex(np.linalg.det(mat))
    if abs(det) < DET_MEASURABLE:
        return mat, log_scale
    log_det = math.log(abs(det)) + d * log_scale
    if abs(log_det) <= DET_DRIFT_TOL and abs(math.atan2(det.imag, det.real)) <= DET_DRIFT_TOL:
        return mat, log_scale
    phase = complex(math.cos(-math.atan2(det.imag, det.real) / d), math.sin(-math.atan2(det.imag, det.real) / d))
    return mat * phase, log_scale - log_det / d


def word_product(family, word: Word, lam: complex, order: str = "left") -> ScaledProduct:
    """Scaled product of generator images along ``word``.

    ``left`` multiplies the increments as γₙ⋯γ₁ and ``right`` as γ₁⋯γₙ;
    a word without recorded increments is read letter by letter.
    """
    letters = np.array(word.ordered(order).letters, dtype=np.intp)
    gens = family.slot_matrices(lam)[:, None]
    if letters.size == 0:
        return ScaledProduct(np.eye(family.dimension, dtype=complex), 0.0)
    mats, logs, _ = kernels.scaled_products(gens, letters_to_slots(letters)[None])
    mat, ls = _renormalize_det(mats[0, 0], float(logs[0, 0]))
    return ScaledProduct(mat, ls)


@lru_cache(maxsize=None)
def subsets(d: int, k: int) -> tuple[tuple[int, ...], ...]:
    """k-subsets of range(d) in lexicographic order (exterior-power basis)."""
    return tuple(itertools.combinations(range(d), k))


def exterior_power(M: np.ndarray, k: int) -> np.ndarray:
    """Matrix of ∧ᵏM in the lexicographic basis e_I = e_{i1}∧…∧e_{ik}.

    Works on stacks: ``M`` may have shape ``(..., d, d)``.
    """
    M = np.asarray(M, dtype=complex)
    d = M.shape[-1]
    if not 1 <= k <= d:
        raise ValueError(f"need 1 <= k <= {d}, got {k}")
    if k == 1:
        return M.copy()
    idx = np.array(subsets(d, k))
    sub = M[..., idx[:, None, :, None], idx[None, :, None, :]]
    return np.linalg.det(sub)


def eigen_moduli(M: np.ndarray, vectors: bool = False):
    """Eigenvalue moduli in decreasing order (optionally with eigenvalues and vectors).

    With ``vectors=True`` returns ``(moduli, eigenvalues, V)`` where column i of
    ``V`` is a unit eigenvector for ``eigenvalues[i]``.
    """
    M = np.asarray(M, dtype=complex)
    vals = np.array(_eigen.eigvals_sorted(M.tolist()), dtype=complex)
    mods = np.abs(vals)
    if not vectors:
        return mods
    V = np.stack([inverse_iteration(M, mu) for mu in vals], axis=1)
    return mods, vals, V


def inverse_iteration(M: np.ndarray, mu: complex, iters: int = 3) -> np.ndarray:
    """Unit eigenvector of M for the eigenvalue ``mu``."""
    d = M.shape[-1]
    scale = max(np.linalg.norm(M), 1e-300)
    shift = mu + scale * 1e-10 * (1 + 1j)
    B = M - shift * np.eye(d)
    x = np.ones(d, dtype=complex) / math.sqrt(d)
    x[0] += 0.3
    x /= np.linalg.norm(x)
    for _ in range(iters):
        try:
            y = np.linalg.solve(B, x)
        except np.linalg.LinAlgError:
            B = B - scale * 1e-8 * np.eye(d)
            y = np.linalg.solve(B, x)
        nrm = np.linalg.norm(y)
        if not np.isfinite(nrm) or nrm == 0:
            break
        x = y / nrm
    return x


def top_eigvecs_batch(mats: np.ndarray, vals: np.ndarray, m: int = 2) -> np.ndarray:
    """Unit eigenvectors for the first ``m`` eigenvalues of each matrix in a stack.

    ``mats`` is ``(N, d, d)``, ``vals`` its sorted eigenvalues ``(N, d)``.
    Returns ``(N, m, d)``. For d = 2 a closed form is used.
    """
    N, d, _ = mats.shape
    out = np.empty((N, m, d), dtype=complex)
    if d == 2:
        a, b, c, e = mats[:, 0, 0], mats[:, 0, 1], mats[:, 1, 0], mats[:, 1, 1]
        for i in range(m):
            mu = vals[:, i]
            u = np.stack([b, mu - a], axis=-1)
            w = np.stack([mu - e, c], axis=-1)
            nu, nw = np.linalg.norm(u, axis=-1), np.linalg.norm(w, axis=-1)
            v = np.where((nu >= nw)[:, None], u, w)
            nv = np.maximum(nu, nw)
            degenerate = nv <= 1e-300
            v = np.where(degenerate[:, None], np.eye(2)[i][None], v / np.where(degenerate, 1, nv)[:, None])
            out[:, i] = v
        return out
    scale = np.maximum(np.linalg.norm(mats, axis=(-2, -1)), 1e-300)
    eye = np.eye(d)
    for i in range(m):
        shift = vals[:, i] + scale * 1e-10 * (1 + 1j)
        B = mats - shift[:, None, None] * eye
        x = np.broadcast_to(np.ones(d, dtype=complex) / math.sqrt(d), (N, d)).copy()
        x[:, 0] += 0.3
        for _ in range(3):
            try:
                y = np.linalg.solve(B, x[..., None])[..., 0]
            except np.linalg.LinAlgError:
                B = B - (scale * 1e-8)[:, None, None] * eye
                y = np.linalg.solve(B, x[..., None])[..., 0]
            nrm = np.linalg.norm(y, axis=-1)
            ok = np.isfinite(nrm) & (nrm > 0)
            x = np.where(ok[:, None], y / np.where(ok, nrm, 1)[:, None], x)
        out[:, i] = x
    return out


def qr_step(frame: np.ndarray, M: np.ndarray):
    """QR of ``M @ frame``: returns (new orthonormal frame, log|R_ii|)."""
    frame = np.asarray(frame, dtype=complex)
    ortho = np.linalg.norm(frame.conj().T @ frame - np.eye(frame.shape[1]))
    if ortho > QR_ORTHO_TOL:
        raise ValueError(f"frame columns not orthonormal (defect {ortho:.2e})")
    q, r = np.linalg.qr(np.asarray(M, dtype=complex) @ frame)
    diag = np.abs(np.diagonal(r))
    if (diag < 1e-300).any():
        raise RankCollapse("|R_ii| below 1e-300")
    # fix phases so that R has a positive diagonal (makes the frame unique)
    phase = np.diagonal(r) / diag
    return q * phase[None, :], np.log(diag)


# -- projective geometry -------------------------------------------------------

def normalize_projective(v: np.ndarray) -> np.ndarray:
    """Scale so that the largest-modulus coordinate equals 1 (works on stacks)."""
    v = np.asarray(v, dtype=complex)
    idx = np.argmax(np.abs(v), axis=-1)
    pivot = np.take_along_axis(v, idx[..., None], axis=-1)
    if np.any(pivot == 0):
        raise ValueError("the zero vector is not a projective point")
    return v / pivot


@dataclass(frozen=True)
class ProjPoint:
    coords: tuple[complex, ...]

    @classmethod
    def from_vector(cls, v) -> "ProjPoint":
        return cls(tuple(complex(z) for z in normalize_projective(v)))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.coords, dtype=complex)


@dataclass(frozen=True)
class ProjHyperplane:
    """Hyperplane {x : Σ coeffs_i x_i = 0}."""

    coeffs: tuple[complex, ...]

    @classmethod
    def from_vector(cls, v) -> "ProjHyperplane":
        return cls(tuple(complex(z) for z in normalize_projective(v)))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.coeffs, dtype=complex)

    def contains(self, p: ProjPoint, tol: float = 1e-9) -> bool:
        return distance_to_hyperplane(p.vector, self.vector) <= tol


def fubini_study_distance(p, q) -> float:
    """arccos(|⟨p, q⟩| / (‖p‖‖q‖)), in [0, π/2]."""
    p = p.vector if isinstance(p, (ProjPoint, ProjHyperplane)) else np.asarray(p, dtype=complex)
    q = q.vector if isinstance(q, (ProjPoint, ProjHyperplane)) else np.asarray(q, dtype=complex)
    c = np.abs(np.vdot(p, q)) / (np.linalg.norm(p) * np.linalg.norm(q))
    return float(np.arccos(np.clip(c, 0.0, 1.0)))


def fs_distance_batch(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Row-wise Fubini–Study distances for stacks of vectors (last axis)."""
    c = np.abs(np.sum(P.conj() * Q, axis=-1)) / (np.linalg.norm(P, axis=-1) * np.linalg.norm(Q, axis=-1))
    return np.arccos(np.clip(c, 0.0, 1.0))


def distance_to_hyperplane(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Fubini–Study distance from points ``x`` to the hyperplane ker ``h``: arcsin(|h·x|/‖h‖‖x‖)."""
    s = np.abs(np.sum(np.asarray(x) * np.asarray(h), axis=-1))
    s = s / (np.linalg.norm(x, axis=-1) * np.linalg.norm(h, axis=-1))
    return np.arcsin(np.clip(s, 0.0, 1.0))
