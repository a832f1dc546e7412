"""Lyapunov fields on a parameter grid, their discrete dd^c, and T_bif.

All nodes share the same sampled words (common random numbers), so the
estimated χ field is an average of the smooth subharmonic functions
λ ↦ (1/n) log‖ρ_λ(w)‖ and can be differentiated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dsl import Representation, dual_family
from .errors import InsufficientGrid, NumericalError
from .grid import ScanField, ScanGrid
from .lyapunov import increment_samples, log_norm_samples, walk_slots
from .walk import StepMeasure

NODE_CHUNK = 2048
THETA_DEFAULT = 5.0
MAD_TO_SIGMA = 1.4826
CALIBRATION_TOL = 0.02
CALIBRATION_CENTER = 0.3

__all__ = ["ScanGrid", "ScanField", "chi_field", "chi_samples", "ddc_density", "ddc_stack",
           "t_bif", "TBifResult", "calibrate"]


# -- χ fields -------------------------------------------------------------------

def chi_samples(family: Representation, mu: StepMeasure, grid: ScanGrid, n: int, trials: int,
                seed, estimator: str = "plain") -> tuple[np.ndarray, np.ndarray]:
    """Per-trial top-exponent estimates at every node: ``(trials, ny, nx)`` and the bad-node mask.

    ``plain`` is (1/n) log‖ρ_λ(γₙ⋯γ₁)‖; ``increment`` is
    (1/n)(log‖ρ_λ(γ₂ₙ⋯γ₁)‖ − log‖ρ_λ(γₙ⋯γ₁)‖).
    """
    if n < 1 or trials < 2:
        raise ValueError("need n >= 1 and trials >= 2")
    lams = grid.nodes().ravel()
    out = np.empty((trials, lams.size))
    bad = np.zeros(lams.size, dtype=bool)
    slots = walk_slots(mu, n, trials, seed) if estimator == "plain" else None
    for a in range(0, lams.size, NODE_CHUNK):
        part = lams[a:a + NODE_CHUNK]
        if estimator == "plain":
            logs, b = log_norm_samples(family, part, slots, strict=False)
            out[:, a:a + NODE_CHUNK] = logs / n
        elif estimator == "increment":
            vals, b = increment_samples(family, part, mu, n, trials, seed, strict=False)
            out[:, a:a + NODE_CHUNK] = vals
        else:
            raise ValueError(f"unknown estimator {estimator!r}")
        bad[a:a + NODE_CHUNK] = b
    out[:, bad] = np.nan
    return out.reshape(trials, *grid.shape), bad.reshape(grid.shape)


def _field_from_samples(grid, samples, bad, kind, meta) -> ScanField:
    t = samples.shape[0]
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / math.sqrt(t)
    return ScanField(grid, mean, bad, {"kind": kind, **meta}, stderr=se)


def chi_field(family: Representation, mu: StepMeasure, grid: ScanGrid, n: int, trials: int, seed,
              which: str = "top", estimator: str = "plain"):
    """χ₁ (``top``), χ_d (``bottom``) or both (``pair``) on the grid.

    χ_d is obtained as −χ*₁ of the dual family ρ* = ρ(·⁻¹)ᵗ driven by the
    same μ and the same words.
    """
    meta = {"n": n, "trials": trials, "seed": seed, "estimator": estimator}
    out = []
    if which in ("top", "pair"):
        s, bad = chi_samples(family, mu, grid, n, trials, seed, estimator)
        out.append(_field_from_samples(grid, s, bad, "chi_top", meta))
    if which in ("bottom", "pair"):
        s, bad = chi_samples(dual_family(family), mu, grid, n, trials, seed, estimator)
        out.append(_field_from_samples(grid, -s, bad, "chi_bottom", meta))
    if not out:
        raise ValueError(f"which must be top, bottom or pair, not {which!r}")
    return out[0] if len(out) == 1 else tuple(out)


# -- dd^c -------------------------------------------------------------------------

def ddc_stack(values: np.ndarray, grid: ScanGrid) -> np.ndarray:
    """(1/2π)·(five-point Laplacian)·(cell area) on the last two axes.

    The boundary ring is NaN. Works on stacks ``(..., ny, nx)``.
    """
    v = np.asarray(values, dtype=float)
    out = np.full(v.shape, np.nan)
    c = v[..., 1:-1, 1:-1]
    lap = ((v[..., 1:-1, 2:] + v[..., 1:-1, :-2] - 2 * c) / grid.hx ** 2
           + (v[..., 2:, 1:-1] + v[..., :-2, 1:-1] - 2 * c) / grid.hy ** 2)
    out[..., 1:-1, 1:-1] = lap * grid.cell_area / (2 * math.pi)
    return out


def _stencil_mask(mask: np.ndarray) -> np.ndarray:
    """Nodes whose stencil touches a masked node, plus the boundary ring."""
    out = np.ones(mask.shape, dtype=bool)
    m = mask
    out[1:-1, 1:-1] = (m[1:-1, 1:-1] | m[1:-1, 2:] | m[1:-1, :-2] | m[2:, 1:-1] | m[:-2, 1:-1])
    return out


def ddc_density(f: ScanField) -> ScanField:
    """Mass density of dd^c f per node (boundary ring masked).

    Normalised so that dd^c log|λ − λ₀| has total mass +1 around λ₀.
    """
    g = f.grid
    if g.nx < 3 or g.ny < 3:
        raise InsufficientGrid("dd^c needs at least a 3x3 grid")
    mask = _stencil_mask(f.mask)
    if (~mask).sum() == 0 or (~f.mask[1:-1, 1:-1]).sum() < 9:
        raise InsufficientGrid("dd^c needs an unmasked interior of at least 3x3 nodes")
    vals = ddc_stack(np.where(f.mask, 0.0, f.values), g)
    return ScanField(g, np.where(mask, np.nan, vals), mask,
                     {**f.meta, "kind": f"ddc({f.meta.get('kind', 'field')})"})


# -- calibration --------------------------------------------------------------------

_calibration_cache: dict = {}


def calibrate(n: int = 201, center: complex = CALIBRATION_CENTER) -> dict:
    """Lelong calibration: mass of dd^c log|λ − center| over [−1, 1]²."""
    g = ScanGrid(-1.0, 1.0, -1.0, 1.0, n, n)
    lam = g.nodes()
    with np.errstate(divide="ignore"):
        f = ScanField(g, np.log(np.abs(lam - center)), None, {"kind": "lelong"})
    mass = ddc_density(f).total()
    harmonic = ddc_density(ScanField(g, (lam ** 2).real, None, {"kind": "harmonic"})).total()
    err = abs(mass - 1.0)
    return {"grid": str(g), "center": [center.real, center.imag] if isinstance(center, complex)
            else [float(center), 0.0], "mass": mass, "error": err,
            "harmonic_mass": harmonic, "eps_disc": max(err, abs(harmonic)),
            "passed": err <= CALIBRATION_TOL}


def calibration() -> dict:
    """Cached startup self-test; raises if the normalisation is off."""
    if "result" not in _calibration_cache:
        res = calibrate()
        if not res["passed"]:
            raise NumericalError(f"Lelong calibration failed: mass {res['mass']:.6f}")
        _calibration_cache["result"] = res
    return _calibration_cache["result"]


def eps_disc() -> float:
    return calibration()["eps_disc"]


# -- T_bif ----------------------------------------------------------------------------

@dataclass
class TBifResult:
    t1: ScanField
    td: ScanField
    tbif: ScanField
    support: np.ndarray
    noise_floor: np.ndarray
    chi_top: ScanField
    chi_bottom: ScanField
    meta: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "mass_t1": self.t1.total(),
            "mass_td": self.td.total(),
            "mass_tbif": self.tbif.total(),
            "support_cells": int(self.support.sum()),
            **self.meta,
        }


def _robust_sigma(samples: np.ndarray) -> np.ndarray:
    med = np.median(samples, axis=0)
    return MAD_TO_SIGMA * np.median(np.abs(samples - med), axis=0)


def t_bif(family: Representation, mu: StepMeasure, grid: ScanGrid, n: int, trials: int, seed,
          theta: float = THETA_DEFAULT, estimator: str = "increment") -> TBifResult:
    """T₁ = dd^c χ₁, T_d = dd^c(−χ_d) = dd^c χ*₁, T_bif = T₁ + T_d, and the support of T_bif.

    A node is in the support when the mean T_bif density exceeds θ times its
    robust standard error, estimated from the spread of the per-trial
    densities (1.4826·MAD/√trials).
    """
    cal = calibration()
    top, bad1 = chi_samples(family, mu, grid, n, trials, seed, estimator)
    dual, bad2 = chi_samples(dual_family(family), mu, grid, n, trials, seed, estimator)
    bad = bad1 | bad2
    mask = _stencil_mask(bad)
    d1 = ddc_stack(np.where(bad, 0.0, top), grid)
    dd = ddc_stack(np.where(bad, 0.0, dual), grid)
    dsum = d1 + dd
    meta = {"n": n, "trials": trials, "seed": seed, "estimator": estimator}

    def fld(stack, kind):
        v = np.where(mask, np.nan, stack.mean(axis=0))
        se = stack.std(axis=0, ddof=1) / math.sqrt(trials)
        return ScanField(grid, v, mask, {"kind": kind, **meta}, stderr=se)

    t1, td, tb = fld(d1, "T1"), fld(dd, "Td"), fld(dsum, "Tbif")
    noise = theta * _robust_sigma(np.where(mask, 0.0, dsum)) / math.sqrt(trials)
    support = ~mask & (tb.values > noise)
    valid = ~mask
    neg = valid & (tb.values < 0)
    chi1 = _field_from_samples(grid, top, bad, "chi_top", meta)
    chid = _field_from_samples(grid, -dual, bad, "chi_bottom", meta)
    most_neg = float(np.min(tb.values[valid])) if valid.any() else math.nan
    info = {
        **meta, "theta": theta,
        "clip_fraction": float(neg.sum() / max(valid.sum(), 1)),
        "most_negative_density": most_neg,
        "calibration_error": cal["error"],
        "eps_disc": cal["eps_disc"],
    }
    return TBifResult(t1, td, tb, support, noise, chi1, chid, info)
