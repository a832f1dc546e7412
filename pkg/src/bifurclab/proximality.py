"""Proximality of matrices and of words along a parameter grid.

A matrix is proximal when it has a unique eigenvalue of maximal modulus. For
a word w the gap field λ ↦ log(|μ₁|/|μ₂|) of ρ_λ(w) is evaluated on a grid;
a word is flagged when its proximality is not constant over the grid.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dsl import Representation
from .grid import ScanField, ScanGrid
from .linalg import (ProjHyperplane, ProjPoint, eigen_moduli, fs_distance_batch,
                     inverse_iteration, top_eigvecs_batch)
from .walk import StepMeasure, Word, letters_array, letters_to_slots, sample_word

TOL_GAP = 1e-9
SCAN_THRESHOLD = 1e-4
TIE_RTOL = 1e-12  # moduli closer than this (relative) count as equal
MATCH_RATIO = 0.5  # branch matching is trusted when the better cost is this much smaller
MATCH_STEP = 0.5  # ... and at most this large
MAX_SUBDIVISION = 64


@dataclass(frozen=True)
class ProximalityVerdict:
    is_proximal: bool
    gap: float
    fix_plus: ProjPoint | None = None
    fix_minus: ProjHyperplane | None = None
    top_eigenvalue: complex | None = None


def check_proximal(M, tol_gap: float = TOL_GAP) -> ProximalityVerdict:
    """Proximality verdict with attracting point and repelling hyperplane."""
    M = np.asarray(M, dtype=complex)
    mods = eigen_moduli(M)
    if mods[0] == 0:
        return ProximalityVerdict(False, 0.0)
    if mods[1] >= mods[0] * (1 - TIE_RTOL):
        gap = 0.0
    elif mods[1] == 0:
        gap = math.inf
    else:
        gap = math.log(mods[0] / mods[1])
    if not gap > tol_gap:
        return ProximalityVerdict(False, gap)
    _, vals, V = eigen_moduli(M, vectors=True)
    mu1 = complex(vals[0])
    w = inverse_iteration(M.T, mu1)  # left eigenvector: wᵀM = μ₁wᵀ
    return ProximalityVerdict(True, gap, ProjPoint.from_vector(V[:, 0]),
                              ProjHyperplane.from_vector(w), mu1)


# -- grid evaluation -----------------------------------------------------------

def _word_products(family: Representation, slots: np.ndarray, grid: ScanGrid):
    """Scaled products of each word at each node: ``(W, P, d, d)``, logs, bad nodes."""
    lams = grid.nodes().ravel()
    images, bad = family.slot_images(lams, strict=False)
    mats, logs, _ = kernels.scaled_products(images, slots)
    return mats, logs, bad


def _top_two(mats: np.ndarray, logs: np.ndarray):
    """log-moduli and arguments of the top two eigenvalues of the true products.

    Returns ``(logmod (…,2), arg (…,2), vals (…,d))`` with vals of the scaled
    matrices. For d = 2 the second modulus comes from det = 1, which stays
    exact when the scaled second eigenvalue underflows.
    """
    shape = mats.shape[:-2]
    d = mats.shape[-1]
    vals = kernels.eigvals_batch(mats)
    with np.errstate(divide="ignore"):
        lm = np.log(np.abs(vals[..., :2])) + logs[..., None]
    if d == 2:
        lm[..., 1] = -lm[..., 0]
    arg = np.angle(vals[..., :2])
    if d == 2:
        arg[..., 1] = -arg[..., 0]
    return lm.reshape(*shape, 2), arg.reshape(*shape, 2), vals


def gap_from_logmod(lm: np.ndarray) -> np.ndarray:
    g = lm[..., 0] - lm[..., 1]
    tie = g <= TIE_RTOL
    return np.where(tie, 0.0, g)


def word_gap_field(family: Representation, word: Word, grid: ScanGrid, order: str = "left",
                   tol_gap: float = TOL_GAP) -> ScanField:
    """gap(λ) = log(|μ₁|/|μ₂|) of ρ_λ(word) at every node; −0 where not proximal."""
    if len(word) == 0:
        raise ValueError("word must be nonempty")
    slots = letters_to_slots(letters_array([word], order))
    mats, logs, bad = _word_products(family, slots, grid)
    lm, _, _ = _top_two(mats, logs)
    gap = gap_from_logmod(lm)[0]
    gap = np.where(gap > tol_gap, gap, -0.0)
    return ScanField(grid, gap.reshape(grid.shape), bad.reshape(grid.shape),
                     {"kind": "gap", "word": list(word.letters), "tol_gap": tol_gap})


# -- stability scan --------------------------------------------------------------

@dataclass
class WordDiagnostics:
    word: tuple
    length: int
    flagged: bool
    proximal_fraction: float
    min_gap: float
    max_gap: float
    swap_edges: int
    field_changes: int

    def as_dict(self, names=None) -> dict:
        text = Word(self.word).to_text(names) if names else list(self.word)
        return {"word": text, "length": self.length, "flagged": self.flagged,
                "proximal_fraction": self.proximal_fraction, "min_gap": self.min_gap,
                "max_gap": self.max_gap, "swap_edges": self.swap_edges,
                "field_changes": self.field_changes}


@dataclass
class StabilityReport:
    """Empirical proximal stability on a grid.

    ``flagged_cells`` marks nodes adjacent to a change of the top eigenpair
    branch or of the thresholded proximality field, for any flagged word.
    """

    grid: ScanGrid
    words: list
    flagged_cells: np.ndarray
    proximal_fraction: np.ndarray  # per node, over all words
    threshold: float
    seed: object
    meta: dict = field(default_factory=dict)

    @property
    def flagged_words(self) -> list:
        return [w for w in self.words if w.flagged]

    @property
    def stable(self) -> bool:
        return not any(w.flagged for w in self.words)

    def flagged_field(self) -> ScanField:
        return ScanField(self.grid, self.flagged_cells.astype(float), None, {"kind": "flagged"})

    def proximal_field(self) -> ScanField:
        return ScanField(self.grid, self.proximal_fraction, None, {"kind": "proximal_fraction"})

    def summary(self, names=None) -> dict:
        return {
            "grid": self.grid.as_dict(),
            "threshold": self.threshold,
            "words_total": len(self.words),
            "words_flagged": len(self.flagged_words),
            "flagged_cells": int(self.flagged_cells.sum()),
            "empirically_proximally_stable": self.stable,
            "words": [w.as_dict(names) for w in self.words],
            **self.meta,
        }


def _wrap(a: np.ndarray) -> np.ndarray:
    return np.abs((a + np.pi) % (2 * np.pi) - np.pi)


def _pair_costs(lmA, arA, vA, lmB, arB, vB):
    """Costs of matching the top two eigenpairs of A to those of B as-is or crossed.

    An eigenpair distance is |Δ log|μ|| + |Δ arg μ| (a metric on ℂ*) plus the
    Fubini–Study distance of the eigenvectors.
    """
    def dist(i, j):
        return (np.abs(lmA[..., i] - lmB[..., j]) + _wrap(arA[..., i] - arB[..., j])
                + fs_distance_batch(vA[..., i, :], vB[..., j, :]))
    return dist(0, 0) + dist(1, 1), dist(0, 1) + dist(1, 0)


def _confident(same, swap):
    lo, hi = np.minimum(same, swap), np.maximum(same, swap)
    return (lo <= MATCH_RATIO * hi) & (lo <= MATCH_STEP)


def _edge_swaps(lm, arg, vecs, valid, axis):
    """Swap and confidence indicators for edges between neighbours along ``axis``."""
    def shift(x):
        sl_a = [slice(None)] * x.ndim
        sl_b = [slice(None)] * x.ndim
        sl_a[axis] = slice(None, -1)
        sl_b[axis] = slice(1, None)
        return x[tuple(sl_a)], x[tuple(sl_b)]

    lmA, lmB = shift(lm)
    arA, arB = shift(arg)
    vA, vB = shift(vecs)
    okA, okB = shift(valid)
    same, swap = _pair_costs(lmA, arA, vA, lmB, arB, vB)
    ok = okA & okB
    return (swap < same) & ok, _confident(same, swap) | ~ok


def _eigdata(family, slots, lams):
    """Top-two eigen data of one word at arbitrary parameters."""
    images, bad = family.slot_images(lams, strict=False)
    mats, logs, _ = kernels.scaled_products(images, slots)
    mats, logs = mats[0], logs[0]
    P, d, _ = mats.shape
    lm, arg, vals = _top_two(mats, logs)
    vecs = top_eigvecs_batch(mats, vals, 2)
    return lm, arg, vecs, bad


def _track_edges(family, slots, lamA, lamB, max_sub):
    """Follow the top eigenpair of A along straight paths to B.

    Paths are cut into m steps, m = 4, 16, … up to ``max_sub``, until every
    step matches confidently. Returns True where the branch that is on top at
    A arrives as the second eigenpair at B.
    """
    E = lamA.size
    result = np.zeros(E, dtype=bool)
    todo = np.arange(E)
    m = 4
    while todo.size:
        t = np.arange(m + 1) / m
        pts = lamA[todo, None] + (lamB - lamA)[todo, None] * t[None, :]
        lm, arg, vecs, bad = _eigdata(family, slots, pts.ravel())
        e = todo.size
        lm = lm.reshape(e, m + 1, 2)
        arg = arg.reshape(e, m + 1, 2)
        vecs = vecs.reshape(e, m + 1, 2, -1)
        branch = np.zeros(e, dtype=bool)  # False: A's top branch sits at index 0
        conf = ~bad.reshape(e, m + 1).any(axis=1)
        for k in range(m):
            same, swap = _pair_costs(lm[:, k], arg[:, k], vecs[:, k],
                                     lm[:, k + 1], arg[:, k + 1], vecs[:, k + 1])
            branch ^= swap < same
            conf &= _confident(same, swap)
        result[todo] = branch
        if m >= max_sub:
            break
        todo = todo[~conf]
        m *= 4
    return result


def _refine_edges(family, word_slots, nodes, swaps, conf, axis, max_sub):
    """Re-decide unconfident edges of one word by path tracking (in place)."""
    jj, ii = np.nonzero(~conf)
    if jj.size == 0 or max_sub < 4:
        return
    lamA = nodes[jj, ii]
    lamB = nodes[jj + (axis == 1), ii + (axis == 2)]
    swaps[jj, ii] = _track_edges(family, word_slots, lamA, lamB, max_sub)


def _incident(edges_x, edges_y, shape):
    """Nodes touching any marked edge."""
    out = np.zeros(shape, dtype=bool)
    out[:, :-1] |= edges_x
    out[:, 1:] |= edges_x
    out[:-1, :] |= edges_y
    out[1:, :] |= edges_y
    return out


def all_words(k: int, max_length: int) -> list[Word]:
    """Every word of length 1..max_length in k generators and inverses (no reduction)."""
    letters = [j for g in range(1, k + 1) for j in (g, -g)]
    return [Word(t) for L in range(1, max_length + 1) for t in itertools.product(letters, repeat=L)]


def stability_scan(family: Representation, mu: StepMeasure, grid: ScanGrid, word_lengths,
                   words_per_length: int, seed, threshold: float = SCAN_THRESHOLD,
                   exhaustive_max_length: int | None = None, batch: int = 64,
                   max_subdivision: int = MAX_SUBDIVISION) -> StabilityReport:
    """Sample words from μⁿ for each n and test constancy of their proximality.

    A word is flagged when, along some grid edge, its thresholded proximality
    changes or the top eigenpair at one end continues into the second
    eigenpair at the other (the moduli crossed in between). Edges where
    matching neighbouring eigenpairs is ambiguous are re-decided by tracking
    the branch along a subdivided path (``max_subdivision`` steps at most).

    With ``exhaustive_max_length`` the sampled words are replaced by all words
    up to that length (small alphabets only).
    """
    if exhaustive_max_length is not None:
        if exhaustive_max_length > 6:
            raise ValueError("exhaustive mode supports lengths up to 6")
        words = all_words(len(family.generators), exhaustive_max_length)
    else:
        words = [sample_word(mu, int(n), seed, "stability", int(n), i)
                 for n in word_lengths for i in range(words_per_length)]
    shape = grid.shape
    nodes = grid.nodes()
    flagged = np.zeros(shape, dtype=bool)
    prox_count = np.zeros(shape)
    diags: list[WordDiagnostics] = []
    for start in range(0, len(words), batch):
        chunk = words[start:start + batch]
        slots = letters_to_slots(letters_array(chunk, "left"))
        mats, logs, bad = _word_products(family, slots, grid)
        W, P, d, _ = mats.shape
        lm, arg, vals = _top_two(mats, logs)
        vecs = top_eigvecs_batch(mats.reshape(W * P, d, d), vals.reshape(W * P, d), 2)
        vecs = vecs.reshape(W, *shape, 2, d)
        lm = lm.reshape(W, *shape, 2)
        arg = arg.reshape(W, *shape, 2)
        valid = ~bad.reshape(shape)
        gap = gap_from_logmod(lm)
        prox = gap > threshold
        # a branch swap only matters between proximal nodes; elsewhere the
        # thresholded field change below already records the transition
        ok = prox & valid
        sx, conf_x = _edge_swaps(lm, arg, vecs, ok, axis=2)
        sy, conf_y = _edge_swaps(lm, arg, vecs, ok, axis=1)
        cx = (prox[:, :, 1:] != prox[:, :, :-1]) & valid[:, 1:] & valid[:, :-1]
        cy = (prox[:, 1:, :] != prox[:, :-1, :]) & valid[1:, :] & valid[:-1, :]
        for w, word in enumerate(chunk):
            if max_subdivision:
                _refine_edges(family, slots[w:w + 1], nodes, sx[w], conf_x[w], 2, max_subdivision)
                _refine_edges(family, slots[w:w + 1], nodes, sy[w], conf_y[w], 1, max_subdivision)
            n_swap = int(sx[w].sum() + sy[w].sum())
            n_change = int(cx[w].sum() + cy[w].sum())
            is_flagged = n_swap > 0 or n_change > 0
            if is_flagged:
                flagged |= _incident(sx[w] | cx[w], sy[w] | cy[w], shape)
            g = gap[w][valid]
            prox_count += prox[w] & valid
            diags.append(WordDiagnostics(word.letters, len(word), is_flagged,
                                         float((g > threshold).mean()) if g.size else 0.0,
                                         float(g.min()) if g.size else math.nan,
                                         float(g.max()) if g.size else math.nan,
                                         n_swap, n_change))
    frac = prox_count / max(len(words), 1)
    meta = {"word_lengths": list(map(int, word_lengths)) if exhaustive_max_length is None else None,
            "words_per_length": words_per_length, "exhaustive_max_length": exhaustive_max_length}
    return StabilityReport(grid, diags, flagged, frac, threshold, seed, meta)
