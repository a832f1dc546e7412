"""Zeros of λ ↦ tr ρ_λ(w) − t counted by the argument principle.

The function is evaluated as tr(M̃) − t·e^{−s} where ρ_λ(w) = e^{s}M̃ is the
scaled product; dividing by the positive factor e^{s} leaves arguments
unchanged and avoids overflow for long words.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dsl import Representation
from .errors import BoundaryZero, DegenerateLevel, NonIntegerWinding, ValidationError
from .grid import ScanField, ScanGrid
from .walk import StepMeasure, Word, letters_array, letters_to_slots, sample_word

ARG_STEP = math.pi / 4  # largest accepted argument change between samples
WINDING_RESIDUAL = 0.1
BOUNDARY_SAMPLES = 256
MAX_BOUNDARY_SAMPLES = 2048
SUBDIVISION_LEVELS = 4
EDGE_SAMPLES = 64  # per cell edge on the grid lattice: 256 per cell loop
MAX_EDGE_SAMPLES = 512
EVAL_CHUNK = 1 << 15
NEAR_ZERO = 1e-12  # |f| relative to the loop's median modulus
SEGMENT_ZERO = 1e-9  # same, for the minimum located along an unresolved segment
SEGMENT_SEARCH = 80  # golden-section iterations along an unresolved segment
DEFAULT_LEVEL = 2.0
DEGENERATE_TOL = 1e-9  # max |tr M̃ − t e^{−s}| over the sample lattice for an identically-zero level


def trace_minus_t(family: Representation, word: Word, t: complex, order: str = "left"):
    """Vectorised λ ↦ (tr ρ_λ(word) − t)·e^{−s} (same argument as tr − t)."""
    slots = letters_to_slots(letters_array([word], order))

    def f(lams):
        lams = np.asarray(lams, dtype=complex).ravel()
        out = np.empty(lams.size, dtype=complex)
        for a in range(0, lams.size, EVAL_CHUNK):
            part = lams[a:a + EVAL_CHUNK]
            images, bad = family.slot_images(part, strict=False)
            mats, logs, _ = kernels.scaled_products(images, slots)
            tr = np.trace(mats[0], axis1=-2, axis2=-1)
            val = tr - t * np.exp(-logs[0])
            val[bad] = np.nan
            out[a:a + EVAL_CHUNK] = val
        return out
    return f


def _loop_points(cell, N):
    """N points around the rectangle boundary, counter-clockwise, evenly by arc length."""
    x0, x1, y0, y1 = cell
    w, h = x1 - x0, y1 - y0
    s = np.arange(N) / N * 2 * (w + h)
    pts = np.empty(N, dtype=complex)
    a = s < w
    pts[a] = complex(x0, y0) + s[a]
    b = (s >= w) & (s < w + h)
    pts[b] = complex(x1, y0) + 1j * (s[b] - w)
    c = (s >= w + h) & (s < 2 * w + h)
    pts[c] = complex(x1, y1) - (s[c] - w - h)
    d = s >= 2 * w + h
    pts[d] = complex(x0, y1) - 1j * (s[d] - 2 * w - h)
    return pts


def _winding_of_loop(f, pts):
    """Return (winding, residual, max step, min relative modulus) for a closed sample loop."""
    vals = f(pts)
    if not np.isfinite(vals).all():
        raise BoundaryZero("non-finite value on the cell boundary")
    closed = np.append(vals, vals[0])
    steps = np.angle(closed[1:] / closed[:-1])
    total = steps.sum() / (2 * math.pi)
    mod = np.abs(vals)
    rel = mod.min() / max(np.median(mod), 1e-300)
    return total, abs(total - round(total)), np.abs(steps), rel


def _segment_min(f, a, b, iters=SEGMENT_SEARCH) -> float:
    """min |f| along the segment [a, b] by golden-section search (|f| is V-shaped near a zero)."""
    r = (math.sqrt(5) - 1) / 2
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        m1, m2 = hi - r * (hi - lo), lo + r * (hi - lo)
        v = np.abs(f(np.array([a + m1 * (b - a), a + m2 * (b - a)])))
        if v[0] <= v[1]:
            hi = m2
        else:
            lo = m1
    return float(np.abs(f(np.array([a + 0.5 * (lo + hi) * (b - a)])))[0])


def trace_zero_count(family: Representation, word: Word, t: complex, cell,
                     boundary_samples: int = BOUNDARY_SAMPLES, order: str = "left") -> int:
    """Number of zeros (with multiplicity) of tr ρ_λ(word) − t inside the rectangle
    ``cell = (re0, re1, im0, im1)``.

    Samples are doubled up to 2048 while consecutive arguments differ by more
    than π/4; then unresolved boundary segments are bisected up to four more
    times. A boundary that still comes within 10⁻¹² (relative) of a zero
    raises BoundaryZero; an unresolved argument raises NonIntegerWinding.
    """
    f = trace_minus_t(family, word, t, order)
    N = boundary_samples
    pts = _loop_points(cell, N)
    while True:
        total, resid, steps, rel = _winding_of_loop(f, pts)
        if rel <= NEAR_ZERO:
            raise BoundaryZero(f"cell boundary passes within {rel:.2g} (relative) of a zero")
        if steps.max() <= ARG_STEP and resid <= WINDING_RESIDUAL:
            return int(round(total))
        if N >= MAX_BOUNDARY_SAMPLES:
            break
        N *= 2
        pts = _loop_points(cell, N)
    for _ in range(SUBDIVISION_LEVELS):
        closed = np.append(pts, pts[0])
        bad = np.flatnonzero(steps > ARG_STEP)
        mids = 0.5 * (closed[bad] + closed[bad + 1])
        pts = np.insert(pts, bad + 1, mids)
        total, resid, steps, rel = _winding_of_loop(f, pts)
        if rel <= NEAR_ZERO:
            raise BoundaryZero(f"cell boundary passes within {rel:.2g} (relative) of a zero")
        if steps.max() <= ARG_STEP and resid <= WINDING_RESIDUAL:
            return int(round(total))
    # an argument jump that survives refinement is usually a zero sitting on the edge
    closed = np.append(pts, pts[0])
    median = np.median(np.abs(f(pts)))
    for k in np.flatnonzero(steps > ARG_STEP):
        if _segment_min(f, closed[k], closed[k + 1]) <= SEGMENT_ZERO * median:
            raise BoundaryZero("a zero lies on the cell boundary")
    raise NonIntegerWinding(
        f"argument not resolved after {SUBDIVISION_LEVELS} subdivision levels "
        f"(max step {steps.max():.3g} rad, winding {total:.3f})")


# -- grid version ------------------------------------------------------------------

def _edge_increments(f, A, B, m0=EDGE_SAMPLES, m_max=MAX_EDGE_SAMPLES):
    """Argument increment of f along each segment A→B, with adaptive sampling.

    Returns (increments, resolved) where unresolved segments still have a
    large argument step at ``m_max`` samples or pass through a zero.
    """
    E = A.size
    inc = np.zeros(E)
    ok = np.ones(E, dtype=bool)
    todo = np.arange(E)
    m = m0
    while todo.size:
        s = np.arange(m + 1) / m
        pts = A[todo, None] + (B - A)[todo, None] * s[None, :]
        vals = f(pts.ravel()).reshape(todo.size, m + 1)
        with np.errstate(all="ignore"):
            steps = np.angle(vals[:, 1:] / vals[:, :-1])
        finite = np.isfinite(vals).all(axis=1) & (vals != 0).all(axis=1)
        inc[todo] = np.where(finite, steps.sum(axis=1), 0.0)
        fine = finite & (np.abs(np.where(finite[:, None], steps, 0)).max(axis=1) <= ARG_STEP)
        if m >= m_max:
            ok[todo[~fine]] = False
            break
        todo = todo[~fine]
        m *= 2
    return inc, ok


def zero_counts_on_grid(family: Representation, word: Word, t: complex, grid: ScanGrid,
                        order: str = "left"):
    """Zero counts of tr − t in every grid cell (cells centred on the nodes).

    Edges are shared between neighbouring cells, so counts are additive
    under merging cells. Returns (counts (ny, nx) int, masked (ny, nx) bool).
    Raises DegenerateLevel when tr − t vanishes at every cell corner.
    """
    f = trace_minus_t(family, word, t, order)
    xs = grid.re0 + np.arange(grid.nx + 1) * grid.hx
    ys = grid.im0 + np.arange(grid.ny + 1) * grid.hy
    V = xs[None, :] + 1j * ys[:, None]  # (ny+1, nx+1) cell corners
    corner = f(V.ravel())
    fin = np.isfinite(corner)
    if fin.any() and np.abs(corner[fin]).max() <= DEGENERATE_TOL:
        raise DegenerateLevel(f"tr - t vanishes identically for word {word.to_text(family.generators)!r}")
    hA, hB = V[:, :-1].ravel(), V[:, 1:].ravel()  # horizontal edges, left→right
    vA, vB = V[:-1, :].ravel(), V[1:, :].ravel()  # vertical edges, bottom→top
    hinc, hok = _edge_increments(f, hA, hB)
    vinc, vok = _edge_increments(f, vA, vB)
    hinc, hok = hinc.reshape(grid.ny + 1, grid.nx), hok.reshape(grid.ny + 1, grid.nx)
    vinc, vok = vinc.reshape(grid.ny, grid.nx + 1), vok.reshape(grid.ny, grid.nx + 1)
    # counter-clockwise: bottom (→), right (↑), top (←), left (↓)
    total = (hinc[:-1] + vinc[:, 1:] - hinc[1:] - vinc[:, :-1]) / (2 * math.pi)
    counts = np.rint(total)
    resid = np.abs(total - counts)
    masked = ~(hok[:-1] & hok[1:] & vok[:, 1:] & vok[:, :-1]) | (resid > WINDING_RESIDUAL)
    counts = np.where(masked, 0, counts).astype(int)
    return counts, masked


@dataclass
class DivisorCloud:
    """Zero locations (cell centres), multiplicities and source word ids."""

    locations: np.ndarray
    multiplicities: np.ndarray
    word_ids: np.ndarray
    n: int
    t: complex
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return int(self.locations.size)

    @property
    def total_multiplicity(self) -> int:
        return int(self.multiplicities.sum())


@dataclass
class DivisorMeasure:
    cloud: DivisorCloud
    density: ScanField
    masked_cells: int
    words: list


def trace_divisor_measure(family: Representation, mu: StepMeasure, t: complex, grid: ScanGrid,
                          n: int, words_count: int, seed, allow_asymmetric: bool = False,
                          order: str = "left") -> DivisorMeasure:
    """(1/n)·[Z(γₙ⋯γ₁, t)] averaged over sampled words, as a density per unit area.

    Words for which tr − t vanishes identically (for instance powers of a
    parabolic generator at t = 2) have no divisor; they are skipped, listed in
    the cloud metadata, and left out of the average.
    """
    if not mu.symmetric and not allow_asymmetric:
        raise ValidationError("trace-divisor equidistribution assumes a symmetric measure "
                              "(pass allow_asymmetric to override)")
    if n < 1 or words_count < 1:
        raise ValueError("need n >= 1 and words_count >= 1")
    lam = grid.nodes()
    acc = np.zeros(grid.shape)
    masked_any = np.zeros(grid.shape, dtype=bool)
    locs, mults, ids, words, skipped = [], [], [], [], []
    for w in range(words_count):
        word = sample_word(mu, n, seed, "divisor", n, w)
        words.append(word)
        try:
            counts, masked = zero_counts_on_grid(family, word, t, grid, order)
        except DegenerateLevel:
            skipped.append(w)
            continue
        masked_any |= masked
        acc += counts
        nz = np.nonzero(counts > 0)
        locs.append(lam[nz])
        mults.append(counts[nz])
        ids.append(np.full(len(nz[0]), w))
    used = words_count - len(skipped)
    density = acc / (n * max(used, 1) * grid.cell_area)
    if used == 0:
        masked_any[:] = True
    cloud = DivisorCloud(np.concatenate(locs) if locs else np.zeros(0, complex),
                         np.concatenate(mults) if mults else np.zeros(0, int),
                         np.concatenate(ids) if ids else np.zeros(0, int), n, t,
                         {"seed": seed, "words": words_count, "degenerate_words": skipped})
    tt = complex(t)
    fld = ScanField(grid, density, masked_any,
                    {"kind": "divisor_density", "n": n, "t": [tt.real, tt.imag],
                     "words": words_count, "degenerate_words": len(skipped), "seed": seed})
    return DivisorMeasure(cloud, fld, int(masked_any.sum()), words)


def block_normalized(values: np.ndarray, valid: np.ndarray, blocks: int) -> np.ndarray:
    """Sum non-negative parts into ``blocks × blocks`` coarse cells and normalise to total 1."""
    ny, nx = values.shape
    v = np.where(valid, np.clip(np.nan_to_num(values), 0, None), 0.0)
    bj = np.minimum(np.arange(ny) * blocks // ny, blocks - 1)
    bi = np.minimum(np.arange(nx) * blocks // nx, blocks - 1)
    out = np.zeros((blocks, blocks))
    np.add.at(out, (bj[:, None], bi[None, :]), v)
    s = out.sum()
    return out / s if s > 0 else out


def normalized_l1(a: ScanField, b: ScanField, blocks: int = 10) -> float:
    """L¹ distance between two fields normalised to probability measures on a coarse block grid."""
    valid = a.valid & b.valid
    return float(np.abs(block_normalized(a.values, valid, blocks)
                        - block_normalized(b.values, valid, blocks)).sum())
