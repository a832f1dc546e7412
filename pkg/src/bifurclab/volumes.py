"""Fubini–Study volumes of the graphs λ ↦ [ρ_λ(w)·v₀] over a parameter rectangle.

The graph of a holomorphic map f: U → ℙV has volume Vol(U) + mass of
dd^c log‖F‖ on U, for any nonvanishing lift F. Both terms are measured on the
grid: Vol(U) is the area of the interior nodes and the mass is the sum of the
discrete dd^c density over the same nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dsl import Representation, dual_family
from .errors import ValidationError, VolumeUnreliable
from .grid import ScanField, ScanGrid
from .scan import calibration, ddc_density
from .walk import StepMeasure, Word, letters_array, letters_to_slots, sample_word

MAX_MASKED_FRACTION = 0.10
CI_Z = 1.96  # two-sided 95% normal quantile
NODE_CHUNK = 4096


@dataclass
class GraphVolumeRecord:
    word_id: int
    n: int
    vol_u: float
    mass: float
    masked_fraction: float = 0.0

    @property
    def total(self) -> float:
        return self.vol_u + self.mass

    def as_dict(self) -> dict:
        return {"word_id": self.word_id, "n": self.n, "vol_u": self.vol_u, "mass": self.mass,
                "total": self.total, "masked_fraction": self.masked_fraction}


def _as_vector(v0, d: int) -> np.ndarray:
    v = np.asarray(getattr(v0, "vector", v0), dtype=complex).ravel()
    if v.size != d:
        raise ValidationError(f"start vector has {v.size} coordinates, expected {d}")
    if not np.linalg.norm(v) > 0:
        raise ValidationError("start vector must be nonzero")
    return v


def lift_log_norms(family: Representation, words, v0, grid: ScanGrid, order: str = "left"):
    """log‖ρ_λ(w)·v₀‖ for each word at each node: ``(W, ny, nx)`` plus the bad-node mask."""
    v = _as_vector(v0, family.dimension)
    slots = letters_to_slots(letters_array(words, order))
    lams = grid.nodes().ravel()
    out = np.empty((len(words), lams.size))
    bad = np.zeros(lams.size, dtype=bool)
    for a in range(0, lams.size, NODE_CHUNK):
        part = lams[a:a + NODE_CHUNK]
        images, b = family.slot_images(part, strict=False)
        _, logs = kernels.scaled_vector_products(images, slots, v)
        out[:, a:a + NODE_CHUNK] = logs
        bad[a:a + NODE_CHUNK] = b
    out[:, bad] = np.nan
    return out.reshape(len(words), *grid.shape), bad.reshape(grid.shape)


def _record(word_id, n, logs, bad, grid) -> GraphVolumeRecord:
    masked = bad | ~np.isfinite(logs)
    frac = float(masked.mean())
    if frac > MAX_MASKED_FRACTION:
        raise VolumeUnreliable(f"{100 * frac:.1f}% of the grid nodes are masked")
    dens = ddc_density(ScanField(grid, logs, masked))
    interior = dens.valid
    return GraphVolumeRecord(word_id, n, float(interior.sum() * grid.cell_area), dens.total(), frac)


def graph_volume(family: Representation, word: Word, v0, grid: ScanGrid, order: str = "left",
                 word_id: int = 0) -> GraphVolumeRecord:
    """Volume of the graph of λ ↦ [ρ_λ(word)·v₀] over the interior of ``grid``."""
    logs, bad = lift_log_norms(family, [word], v0, grid, order)
    return _record(word_id, len(word), logs[0], bad, grid)


def fit_slope(ns, means, ses):
    """Weighted least-squares line through (n, mean); returns (slope, stderr, intercept)."""
    x = np.asarray(ns, dtype=float)
    y = np.asarray(means, dtype=float)
    s = np.maximum(np.asarray(ses, dtype=float), 1e-300)
    w = 1.0 / s ** 2
    sw, sx, sy = w.sum(), (w * x).sum(), (w * y).sum()
    sxx, sxy = (w * x * x).sum(), (w * x * y).sum()
    den = sw * sxx - sx ** 2
    slope = (sw * sxy - sx * sy) / den
    return float(slope), float(math.sqrt(sw / den)), float((sy - slope * sx) / sw)


@dataclass
class GrowthReport:
    lengths: list
    mean_volume: list
    stderr: list
    slope: float
    slope_stderr: float
    intercept: float
    reference_mass: float | None
    records: list = field(default_factory=list, repr=False)
    meta: dict = field(default_factory=dict)

    @property
    def ci_half_width(self) -> float:
        return CI_Z * self.slope_stderr

    @property
    def relative_error(self) -> float | None:
        if self.reference_mass is None or self.reference_mass == 0:
            return None
        return abs(self.slope - self.reference_mass) / abs(self.reference_mass)

    def as_dict(self) -> dict:
        return {"lengths": list(self.lengths), "mean_volume": list(self.mean_volume),
                "stderr": list(self.stderr), "slope": self.slope,
                "slope_stderr": self.slope_stderr, "ci_half_width": self.ci_half_width,
                "intercept": self.intercept, "reference_mass": self.reference_mass,
                "relative_error": self.relative_error, **self.meta}


def mean_graph_volume(family: Representation, mu: StepMeasure, v0, grid: ScanGrid, lengths,
                      trials: int, seed, dual: bool = False, order: str = "left",
                      reference_mass: float | None = None) -> GrowthReport:
    """Mean graph volume for each n in ``lengths`` and its fitted growth rate.

    Each length uses its own independent words, so the per-length means are
    independent and the weighted fit's standard error is honest. With
    ``dual`` the walk runs in the dual family. ``reference_mass`` (for
    instance the grid mass of T₁) is carried into the report.
    """
    if trials < 2:
        raise ValueError("need at least 2 trials")
    lengths = [int(n) for n in lengths]
    if len(lengths) < 2 or min(lengths) < 0:
        raise ValueError("need at least two non-negative lengths")
    cal = calibration()
    fam = dual_family(family) if dual else family
    means, ses, records = [], [], []
    for n in lengths:
        words = [sample_word(mu, n, seed, "graphvol", int(dual), n, t) for t in range(trials)]
        logs, bad = lift_log_norms(fam, words, v0, grid, order)
        recs = [_record(t, n, logs[t], bad, grid) for t in range(trials)]
        tot = np.array([r.total for r in recs])
        means.append(float(tot.mean()))
        ses.append(float(tot.std(ddof=1) / math.sqrt(trials)))
        records.extend(recs)
    # a length with zero spread (e.g. n = 0) is exact; floor its error at ε_disc
    floor = max(cal["eps_disc"], 1e-12)
    slope, se, icpt = fit_slope(lengths, means, [max(s, floor) for s in ses])
    return GrowthReport(lengths, means, ses, slope, se, icpt, reference_mass, records,
                        {"trials": trials, "seed": seed, "dual": dual, "order": order,
                         "grid": str(grid), "eps_disc": cal["eps_disc"]})
