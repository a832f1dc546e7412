"""Stationary measures on projective space, limit-set images and the Furstenberg integral.

The stationary measure ν_λ is sampled by the forward chain x ← ρ_λ(γ)x with
γ ~ μ. The dual measure lives on hyperplanes ker h and is sampled by the
chain of the dual family, h ← ρ_λ(γ⁻¹)ᵗh.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dsl import Representation, dual_family
from .errors import ChartDegenerate, ValidationError
from .grid import ScanField, ScanGrid
from .linalg import distance_to_hyperplane, word_product
from .lyapunov import chi_top
from .proximality import check_proximal
from .walk import StepMeasure, make_rng, sample_indices, sample_word

BURN_IN = 1000
THINNING = 8
CHAINS = 16
CHART_EPS = 1e-8  # |x_i|/‖x‖ below this makes chart i useless for the point
DEGENERATE_FRACTION = 0.5
PROXIMAL_PROBE_WORDS = 16
PROXIMAL_PROBE_LENGTH = 20
TEST_FUNCTIONS = 8


@dataclass
class PointCloud:
    """Unit vectors sampled from a stationary chain.

    ``points`` is ``(N, d)``; ``chain`` gives each point's chain index. With
    ``dual`` the vectors are hyperplane coefficients h (the hyperplane ker h).
    """

    points: np.ndarray
    chain: np.ndarray
    burn_in: int
    thinning: int
    seed: object
    lam: complex
    dual: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.points) < 1:
            raise ValidationError("a point cloud needs at least one point")

    def __len__(self):
        return len(self.points)

    @property
    def count(self) -> int:
        return len(self.points)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]


def atom_matrices(family: Representation, mu: StepMeasure, lam) -> np.ndarray:
    """ρ_λ of every atom of μ: ``(A, d, d)``."""
    return np.stack([word_product(family, a, lam).full() for a in mu.atoms])


def _warn_if_not_proximal(family, mu, lam, seed):
    prox = 0
    for i in range(PROXIMAL_PROBE_WORDS):
        w = sample_word(mu, PROXIMAL_PROBE_LENGTH, seed, "proximal-probe", i)
        prox += check_proximal(word_product(family, w, lam).matrix).is_proximal
    if 2 * prox < PROXIMAL_PROBE_WORDS:
        warnings.warn(f"only {prox}/{PROXIMAL_PROBE_WORDS} probe words are proximal at {lam}; "
                      "the stationary measure may not be unique", RuntimeWarning, stacklevel=3)


def stationary_sample(family: Representation, lam, mu: StepMeasure, burn_in: int = BURN_IN,
                      count: int = 4096, thinning: int = THINNING, seed=0, dual: bool = False,
                      chains: int = CHAINS, start=None, check: bool = True) -> PointCloud:
    """Sample ν_λ (or ν*_λ with ``dual``) with ``chains`` independent forward chains.

    Chain c uses the random stream (seed, "stationary", dual, c) and starts
    at ``start`` (default e₁). After ``burn_in`` steps it records every
    ``thinning``-th state; the clouds of all chains are concatenated.
    """
    if burn_in < 1 or thinning < 1 or count < 1 or chains < 1:
        raise ValidationError("burn_in, thinning, count and chains must be >= 1")
    lam = complex(lam)
    fam = dual_family(family) if dual else family
    d = fam.dimension
    x0 = np.zeros(d, dtype=complex)
    x0[0] = 1.0
    if start is not None:
        x0 = np.asarray(getattr(start, "vector", start), dtype=complex).ravel()
        if x0.size != d or not np.linalg.norm(x0) > 0:
            raise ValidationError("start must be a nonzero vector of the family's dimension")
    if check:
        _warn_if_not_proximal(fam, mu, lam, seed)
    chains = min(chains, count)
    per = -(-count // chains)
    steps = burn_in + thinning * (per - 1)
    gens = atom_matrices(fam, mu, lam)
    slots = np.stack([sample_indices(mu, steps, seed, "stationary", int(dual), c)
                      for c in range(chains)])
    pts = kernels.projective_chain(gens, slots, x0, burn_in, thinning, per)
    chain = np.repeat(np.arange(chains), per)
    pts = pts.reshape(-1, d)[:count]
    return PointCloud(pts, chain[:count], burn_in, thinning, seed, lam, dual,
                      {"chains": chains, "start": [[z.real, z.imag] for z in x0]})


def _batch_se(values: np.ndarray, chain: np.ndarray) -> float:
    """Standard error of the mean from per-chain means (points within a chain are correlated)."""
    ids = np.unique(chain)
    if ids.size < 2:
        return float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    means = np.array([values[chain == c].mean() for c in ids])
    return float(means.std(ddof=1) / math.sqrt(ids.size))


@dataclass
class FurstenbergReport:
    estimate: float
    stderr: float
    chi: float
    chi_stderr: float

    @property
    def deviation(self) -> float:
        return abs(self.estimate - self.chi)

    @property
    def tolerance(self) -> float:
        return 3.0 * math.hypot(self.stderr, self.chi_stderr)

    @property
    def passed(self) -> bool:
        return self.deviation <= self.tolerance + 1e-12

    def as_dict(self) -> dict:
        return {"estimate": self.estimate, "stderr": self.stderr, "chi_top": self.chi,
                "chi_stderr": self.chi_stderr, "deviation": self.deviation,
                "tolerance": self.tolerance, "passed": self.passed}


def furstenberg_integrand(family: Representation, mu: StepMeasure, lam, points: np.ndarray) -> np.ndarray:
    """∫ log(‖ρ_λ(γ)v‖/‖v‖) dμ(γ) at each point v, as an exact sum over the atoms of μ."""
    gens = atom_matrices(family, mu, lam)
    v = points / np.linalg.norm(points, axis=-1, keepdims=True)
    imgs = np.einsum("aij,nj->ani", gens, v)
    logs = np.log(np.linalg.norm(imgs, axis=-1))
    return np.asarray(mu.weights) @ logs


def furstenberg_check(family: Representation, lam, mu: StepMeasure, cloud: PointCloud,
                      n: int = 2000, trials: int = 200, seed=0, chi=None) -> FurstenbergReport:
    """Compare ∫∫ log(‖ρ(γ)v‖/‖v‖) dμ dν with χ₁ (χ*₁ for a dual cloud).

    ``chi`` may be a precomputed LyapEstimate; otherwise χ₁ is estimated
    with ``n`` steps and ``trials`` walks.
    """
    fam = dual_family(family) if cloud.dual else family
    vals = furstenberg_integrand(fam, mu, lam, cloud.points)
    est = float(vals.mean())
    se = _batch_se(vals, cloud.chain)
    if chi is None:
        chi = chi_top(fam, lam, mu, n, trials, seed)
    return FurstenbergReport(est, se, chi.value, chi.stderr)


# -- stationarity and properness diagnostics ------------------------------------------

def kernel_directions(d: int, seed=0, count: int = TEST_FUNCTIONS) -> np.ndarray:
    """Fixed random unit vectors u_k defining f_k(x) = |⟨u_k, x⟩|²/‖x‖²."""
    rng = make_rng(seed, "kernel-directions", d)
    u = rng.standard_normal((count, d)) + 1j * rng.standard_normal((count, d))
    return u / np.linalg.norm(u, axis=-1, keepdims=True)


def _kernel_values(u: np.ndarray, x: np.ndarray) -> np.ndarray:
    x = x / np.linalg.norm(x, axis=-1, keepdims=True)
    return np.abs(x @ u.conj().T) ** 2  # (N, K)


@dataclass
class StationarityReport:
    differences: np.ndarray
    stderr: np.ndarray

    @property
    def passed(self) -> bool:
        return bool(np.all(np.abs(self.differences) <= 3 * self.stderr + 1e-12))


def stationarity_check(family: Representation, lam, mu: StepMeasure, cloud: PointCloud,
                       seed=0) -> StationarityReport:
    """Mean of f(ρ(γ)x) − f(x) over γ ~ μ (exact atom sum) and x in the cloud, for 8 kernels f."""
    fam = dual_family(family) if cloud.dual else family
    gens = atom_matrices(fam, mu, lam)
    u = kernel_directions(cloud.dimension, seed)
    base = _kernel_values(u, cloud.points)
    moved = np.zeros_like(base)
    for w, g in zip(mu.weights, gens):
        moved += w * _kernel_values(u, cloud.points @ g.T)
    diff = moved - base
    se = np.array([_batch_se(diff[:, k], cloud.chain) for k in range(diff.shape[1])])
    return StationarityReport(diff.mean(axis=0), se)


def kernel_means(cloud: PointCloud, seed=0) -> tuple[np.ndarray, np.ndarray]:
    """Means of the 8 test kernels over the cloud and their batch-means standard errors."""
    vals = _kernel_values(kernel_directions(cloud.dimension, seed), cloud.points)
    se = np.array([_batch_se(vals[:, k], cloud.chain) for k in range(vals.shape[1])])
    return vals.mean(axis=0), se


def hyperplane_mass(cloud: PointCloud, deltas=(1e-1, 1e-2, 1e-3), hyperplanes: int = 16,
                    seed=0) -> dict:
    """Largest fraction of the cloud within FS distance δ of one of 16 random hyperplanes."""
    rng = make_rng(seed, "hyperplanes", cloud.dimension)
    d = cloud.dimension
    H = rng.standard_normal((hyperplanes, d)) + 1j * rng.standard_normal((hyperplanes, d))
    dist = np.stack([distance_to_hyperplane(cloud.points, h) for h in H])  # (H, N)
    frac = [float((dist <= delta).mean(axis=1).max()) for delta in deltas]
    return {"deltas": list(deltas), "max_fraction": frac,
            "decreasing": all(b <= a for a, b in zip(frac, frac[1:]))}


def push_forward(cloud: PointCloud, matrix) -> PointCloud:
    """Apply one matrix to every point of the cloud."""
    pts = cloud.points @ np.asarray(matrix, dtype=complex).T
    pts /= np.linalg.norm(pts, axis=-1, keepdims=True)
    return PointCloud(pts, cloud.chain, cloud.burn_in, cloud.thinning, cloud.seed, cloud.lam,
                      cloud.dual, dict(cloud.meta))


# -- rendering ----------------------------------------------------------------------

def chart_coordinates(points: np.ndarray, chart: int = 0, coord: int | None = None) -> np.ndarray:
    """Affine coordinate x_j/x_i of each point in chart i (j = ``coord``, default the first j ≠ i).

    Raises ChartDegenerate when more than half the points have |x_i| ≈ 0.
    """
    d = points.shape[1]
    if not 0 <= chart < d:
        raise ValidationError(f"chart must be in 0..{d - 1}")
    j = coord if coord is not None else (1 if chart == 0 else 0)
    if j == chart or not 0 <= j < d:
        raise ValidationError("coordinate must differ from the chart index")
    rel = np.abs(points[:, chart]) / np.linalg.norm(points, axis=-1)
    small = rel < CHART_EPS
    if small.mean() > DEGENERATE_FRACTION:
        others = [i for i in range(d) if i != chart]
        raise ChartDegenerate(f"{100 * small.mean():.0f}% of points lie on the hyperplane at "
                              f"infinity of chart {chart}; try chart {others[0]}")
    with np.errstate(all="ignore"):
        z = points[:, j] / points[:, chart]
    z[small] = np.nan
    return z


def sphere_coordinates(points: np.ndarray) -> np.ndarray:
    """Longitude and latitude of [x₀:x₁] on the Riemann sphere (stereographic from z = x₀/x₁)."""
    if points.shape[1] != 2:
        raise ValidationError("the sphere view needs d = 2")
    v = points / np.linalg.norm(points, axis=-1, keepdims=True)
    a, b = v[:, 0], v[:, 1]
    # unit vector (Re 2a b̄, Im 2a b̄, |a|² − |b|²) on S²
    w = 2 * a * b.conj()
    zc = np.abs(a) ** 2 - np.abs(b) ** 2
    return np.stack([np.arctan2(w.imag, w.real), np.arcsin(np.clip(zc, -1, 1))], axis=-1)


def limit_set_render(cloud: PointCloud, chart=0, resolution: int = 512, extent=None,
                     coord: int | None = None) -> ScanField:
    """Histogram of the cloud in an affine chart (or ``chart="sphere"`` for d = 2).

    Returns point counts per pixel as a field; pixel (j, i) covers the cell of
    a ``resolution × resolution`` grid over ``extent = (re0, re1, im0, im1)``.
    The default extent is the square around the 0.5%–99.5% coordinate range.
    """
    if chart == "sphere":
        ll = sphere_coordinates(cloud.points)
        x, y = ll[:, 0], ll[:, 1]
        extent = extent or (-math.pi, math.pi, -math.pi / 2, math.pi / 2)
    else:
        z = chart_coordinates(cloud.points, int(chart), coord)
        ok = np.isfinite(z)
        x, y = z.real[ok], z.imag[ok]
        if extent is None:
            qx, qy = np.quantile(x, [0.005, 0.995]), np.quantile(y, [0.005, 0.995])
            cx, cy = qx.mean(), qy.mean()
            half = 1.05 * max(qx[1] - qx[0], qy[1] - qy[0], 1e-9) / 2
            extent = (cx - half, cx + half, cy - half, cy + half)
    grid = ScanGrid(*map(float, extent), resolution, resolution, strict=False)
    inside = (x >= grid.re0) & (x <= grid.re1) & (y >= grid.im0) & (y <= grid.im1)
    # the closed upper edges belong to the last pixel
    i = np.minimum(np.floor((x - grid.re0) / grid.hx), grid.nx - 1).astype(np.int64)
    j = np.minimum(np.floor((y - grid.im0) / grid.hy), grid.ny - 1).astype(np.int64)
    counts = np.zeros(grid.shape)
    np.add.at(counts, (j[inside], i[inside]), 1.0)
    return ScanField(grid, counts, None, {"kind": "limit_set", "chart": chart,
                                          "points": int(len(cloud)),
                                          "outside": int((~inside).sum())})
