"""Monte-Carlo Lyapunov exponents of random products ρ_λ(γₙ)⋯ρ_λ(γ₁).

Every estimator draws its words from the stream ``(seed, "walk", trial)``, so
estimators called with the same seed see exactly the same increments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dsl import Representation, dual_family
from .errors import NumericalError
from .linalg import exterior_power, subsets
from .walk import StepMeasure, letters_to_slots, sample_letter_block

WALK_STREAM = "walk"
ORDER_SLACK = 3.0  # raw QR order violations beyond this many stderr are errors
RESOLUTION = np.finfo(float).eps  # no estimate is known better than double rounding


@dataclass(frozen=True)
class LyapEstimate:
    """An exponent (or partial sum) in nats per step with its Monte-Carlo error."""

    index: object  # int i, or (1, k) for χ₁ + … + χ_k
    value: float
    stderr: float
    n: int
    trials: int
    seed: int
    estimator: str  # norm | qr | exterior | increment
    samples: np.ndarray = field(default=None, repr=False, compare=False)

    def as_dict(self) -> dict:
        idx = list(self.index) if isinstance(self.index, tuple) else self.index
        return {"index": idx, "value": self.value, "stderr": self.stderr, "n": self.n,
                "trials": self.trials, "seed": self.seed, "estimator": self.estimator}


def _mean_se(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error over axis 0, floored at the floating-point resolution."""
    t = samples.shape[0]
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / math.sqrt(t) if t > 1 else np.zeros_like(mean)
    return mean, np.maximum(se, RESOLUTION * np.maximum(1.0, np.abs(mean)))


def _check_args(n, trials):
    if n < 1:
        raise ValueError("n must be >= 1")
    if trials < 2:
        raise ValueError("trials must be >= 2")


def walk_slots(mu: StepMeasure, n: int, trials: int, seed) -> np.ndarray:
    """Kernel slots ``(trials, L)`` for the shared sampled words, left order."""
    return letters_to_slots(sample_letter_block(mu, n, trials, seed, WALK_STREAM, order="left"))


def log_norm_samples(family: Representation, lams, slots, strict=True):
    """log‖ρ_λ(w)‖_F for every word row of ``slots`` and every λ: ``(W, P)``."""
    images, bad = family.slot_images(lams, strict=strict)
    _, logs, _ = kernels.scaled_products(images, slots)
    return logs, bad


def increment_samples(family: Representation, lams, mu, n, trials, seed, strict=True):
    """Per-trial increment estimates (log‖ρ(w₂ₙ)‖ − log‖ρ(wₙ)‖)/n, shape ``(trials, P)``.

    The first n increments are shared between the two products, which cancels
    most of the O(1/n) transient of the plain estimator (1/n)log‖ρ(wₙ)‖.
    """
    lengths = {len(a) for a in mu.atoms}
    if lengths != {1}:
        raise ValueError("the increment estimator needs single-letter atoms")
    slots = walk_slots(mu, 2 * n, trials, seed)
    images, bad = family.slot_images(lams, strict=strict)
    _, logs, ck = kernels.scaled_products(images, slots, checkpoints=(n,))
    return (logs - ck[..., 0]) / n, bad


def chi_top(family: Representation, lam, mu: StepMeasure, n: int, trials: int, seed) -> LyapEstimate:
    """χ₁ ≈ mean over trials of (1/n) log‖ρ_λ(γₙ⋯γ₁)‖."""
    _check_args(n, trials)
    logs, _ = log_norm_samples(family, lam, walk_slots(mu, n, trials, seed))
    samples = logs[:, 0] / n
    m, se = _mean_se(samples)
    return LyapEstimate(1, float(m), float(se), n, trials, seed, "norm", samples)


def chi_top_long(family: Representation, lam, mu: StepMeasure, n: int, blocks: int, seed) -> LyapEstimate:
    """Diagnostic single-trajectory estimate: one walk of ``n*blocks`` steps,
    error bar from batch means over consecutive blocks of n steps."""
    _check_args(n, blocks)
    slots = letters_to_slots(sample_letter_block(mu, n * blocks, 1, seed, WALK_STREAM, "long"))
    images, _ = family.slot_images(lam)
    _, logs, ck = kernels.scaled_products(images, slots, checkpoints=tuple(n * b for b in range(1, blocks)))
    cum = np.concatenate([[0.0], ck[0, 0], logs[0]])
    samples = np.diff(cum) / n
    m, se = _mean_se(samples)
    return LyapEstimate(1, float(m), float(se), n, blocks, seed, "norm-long", samples)


def chi_spectrum_qr(family: Representation, lam, mu: StepMeasure, n: int, trials: int, seed,
                    k: int | None = None) -> list[LyapEstimate]:
    """Top ``k`` exponents from accumulated log|R_ii| of per-letter QR steps."""
    _check_args(n, trials)
    d = family.dimension
    k = d if k is None else k
    if not 1 <= k <= d:
        raise ValueError(f"k must be in 1..{d}")
    images, _ = family.slot_images(lam)
    sums = kernels.qr_exponents(images, walk_slots(mu, n, trials, seed), k)[:, 0, :] / n
    mean, se = _mean_se(sums)
    for i in range(k - 1):
        gap = mean[i + 1] - mean[i]
        if gap > ORDER_SLACK * math.hypot(se[i], se[i + 1]) + 1e-12:
            raise NumericalError(
                f"QR exponents out of order at {i + 1}: {mean[i]:.6g} < {mean[i + 1]:.6g}")
    order = np.argsort(-mean, kind="stable")
    return [LyapEstimate(i + 1, float(mean[j]), float(se[j]), n, trials, seed, "qr", sums[:, j])
            for i, j in enumerate(order)]


class ExteriorPowerFamily(Representation):
    """λ ↦ ∧ᵏρ_λ in the lexicographic basis of k-subsets."""

    def __init__(self, base: Representation, k: int):
        if not 1 <= k <= base.dimension:
            raise ValueError(f"k must be in 1..{base.dimension}")
        self.base = base
        self.k = k
        self.dimension = len(subsets(base.dimension, k))
        self.generators = base.generators

    def _raw_slot_images(self, lams, strict):
        images, bad = self.base._raw_slot_images(lams, strict)
        return exterior_power(images, self.k), bad


MAX_EXTERIOR_DIM = 70


def chi_exterior(family: Representation, lam, mu: StepMeasure, n: int, trials: int, seed,
                 k: int) -> LyapEstimate:
    """χ₁ + … + χ_k as the top exponent of ∧ᵏρ (same words as ``chi_top``)."""
    _check_args(n, trials)
    d = family.dimension
    if math.comb(d, k) > MAX_EXTERIOR_DIM:
        raise ValueError(f"C({d},{k}) exceeds {MAX_EXTERIOR_DIM}")
    if k == d:
        # ∧ᵈρ = det∘ρ, which is the trivial character on SL(d)
        zeros = np.zeros(trials)
        return LyapEstimate((1, k), 0.0, 0.0, n, trials, seed, "exterior", zeros)
    est = chi_top(ExteriorPowerFamily(family, k), lam, mu, n, trials, seed)
    return LyapEstimate((1, k), est.value, est.stderr, n, trials, seed, "exterior", est.samples)


@dataclass
class DualCheckReport:
    spectrum: list
    dual_spectrum: list
    deviations: list  # |χ*ᵢ + χ_{d+1−i}|
    tolerances: list  # 3·combined stderr
    max_deviation: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "spectrum": [e.as_dict() for e in self.spectrum],
            "dual_spectrum": [e.as_dict() for e in self.dual_spectrum],
            "deviations": self.deviations,
            "tolerances": self.tolerances,
            "max_deviation": self.max_deviation,
            "passed": self.passed,
        }


def dual_spectrum_check(family: Representation, lam, mu: StepMeasure, n: int, trials: int,
                        seed) -> DualCheckReport:
    """Compare the spectrum of ρ* = ρ(·⁻¹)ᵗ with the negated reversed spectrum of ρ.

    Both runs use the same μ and the same seed.
    """
    d = family.dimension
    spec = chi_spectrum_qr(family, lam, mu, n, trials, seed)
    dual = chi_spectrum_qr(dual_family(family), lam, mu, n, trials, seed)
    dev, tol = [], []
    for i in range(d):
        a, b = dual[i], spec[d - 1 - i]
        dev.append(abs(a.value + b.value))
        tol.append(3.0 * math.hypot(a.stderr, b.stderr))
    passed = all(x <= t + 1e-12 for x, t in zip(dev, tol))
    return DualCheckReport(spec, dual, dev, tol, max(dev), passed)
