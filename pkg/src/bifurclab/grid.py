"""Parameter grids over a complex rectangle and real fields on them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InsufficientGrid

MIN_NODES = 8


@dataclass(frozen=True)
class ScanGrid:
    """Rectangle [re0, re1] × [im0, im1] cut into nx × ny cells; nodes at cell centers.

    Arrays on the grid have shape ``(ny, nx)``: row j is Im, column i is Re.
    ``strict=False`` lifts the minimum node count (used for tiny I/O fixtures).
    """

    re0: float
    re1: float
    im0: float
    im1: float
    nx: int
    ny: int
    strict: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        if not (self.re1 > self.re0 and self.im1 > self.im0):
            raise ConfigError("grid extents must be strictly positive")
        if self.nx < 1 or self.ny < 1:
            raise InsufficientGrid("grid needs at least one node per axis")
        if self.strict and (self.nx < MIN_NODES or self.ny < MIN_NODES):
            raise InsufficientGrid(f"grid needs nx, ny >= {MIN_NODES}, got {self.nx}x{self.ny}")

    @classmethod
    def parse(cls, text: str) -> "ScanGrid":
        """From ``RE0,RE1,IM0,IM1,NX,NY``."""
        parts = [p.strip() for p in str(text).split(",")]
        if len(parts) != 6:
            raise ConfigError(f"grid must be RE0,RE1,IM0,IM1,NX,NY; got {text!r}")
        try:
            r0, r1, i0, i1 = (float(p) for p in parts[:4])
            nx, ny = int(parts[4]), int(parts[5])
        except ValueError:
            raise ConfigError(f"grid must be RE0,RE1,IM0,IM1,NX,NY; got {text!r}") from None
        return cls(r0, r1, i0, i1, nx, ny)

    @classmethod
    def square(cls, center: complex, half: float, n: int) -> "ScanGrid":
        return cls(center.real - half, center.real + half, center.imag - half, center.imag + half, n, n)

    def __str__(self):
        return f"{self.re0!r},{self.re1!r},{self.im0!r},{self.im1!r},{self.nx},{self.ny}"

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def hx(self) -> float:
        return (self.re1 - self.re0) / self.nx

    @property
    def hy(self) -> float:
        return (self.im1 - self.im0) / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def xs(self) -> np.ndarray:
        return self.re0 + (np.arange(self.nx) + 0.5) * self.hx

    @property
    def ys(self) -> np.ndarray:
        return self.im0 + (np.arange(self.ny) + 0.5) * self.hy

    def nodes(self) -> np.ndarray:
        """Complex node values, shape ``(ny, nx)``."""
        return self.xs[None, :] + 1j * self.ys[:, None]

    def refine(self, factor: int = 2) -> "ScanGrid":
        return ScanGrid(self.re0, self.re1, self.im0, self.im1, self.nx * factor, self.ny * factor)

    def index_of(self, lam: complex) -> tuple[int, int] | None:
        """``(j, i)`` of the cell containing ``lam`` or None if outside."""
        i = int(np.floor((lam.real - self.re0) / self.hx))
        j = int(np.floor((lam.imag - self.im0) / self.hy))
        if 0 <= i < self.nx and 0 <= j < self.ny:
            return j, i
        return None

    def as_dict(self) -> dict:
        return {"re0": self.re0, "re1": self.re1, "im0": self.im0, "im1": self.im1,
                "nx": self.nx, "ny": self.ny}


@dataclass
class ScanField:
    """Real values on a grid; masked nodes are excluded from every reduction."""

    grid: ScanGrid
    values: np.ndarray
    mask: np.ndarray = None
    meta: dict = field(default_factory=dict)
    stderr: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float).reshape(self.grid.shape)
        if self.mask is None:
            self.mask = ~np.isfinite(self.values)
        else:
            self.mask = np.asarray(self.mask, dtype=bool).reshape(self.grid.shape) | ~np.isfinite(self.values)

    @property
    def valid(self) -> np.ndarray:
        return ~self.mask

    def masked_values(self, fill=np.nan) -> np.ndarray:
        return np.where(self.mask, fill, self.values)

    def total(self) -> float:
        return float(self.values[self.valid].sum())

    def total_abs(self) -> float:
        return float(np.abs(self.values[self.valid]).sum())

    def min(self) -> float:
        v = self.values[self.valid]
        return float(v.min()) if v.size else float("nan")

    def max(self) -> float:
        v = self.values[self.valid]
        return float(v.max()) if v.size else float("nan")

    def with_values(self, values, mask=None, **meta) -> "ScanField":
        m = self.mask if mask is None else mask
        return ScanField(self.grid, values, m, {**self.meta, **meta})
