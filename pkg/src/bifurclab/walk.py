"""Words in the group, step distributions and seeded random-walk sampling.

Letters are signed 1-based generator indices: ``+j`` is generator ``j`` and
``-j`` its inverse. Words are never reduced.

Randomness comes from counter-based Philox streams keyed by
``(base_seed, *stream_id)``, so any (grid cell, trial) pair gets the same
draws regardless of how work is scheduled.
"""

from __future__ import annotations

import warnings
import zlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError

WEIGHT_TOL = 1e-12


def stream_key(tag) -> int:
    """Stable 32-bit integer for a stream tag (int or str)."""
    if isinstance(tag, (int, np.integer)):
        if tag < 0:
            raise ValueError("stream ids must be non-negative")
        return int(tag)
    return zlib.crc32(str(tag).encode())


def make_rng(seed, *stream) -> np.random.Generator:
    """Philox generator for the stream ``(seed, *stream)``.

    ``seed`` may itself be a tuple, which is flattened into the key.
    """
    if isinstance(seed, np.random.Generator):
        if stream:
            raise ValueError("cannot derive a stream from a Generator")
        return seed
    parts = list(seed) if isinstance(seed, (tuple, list)) else [seed]
    key = [stream_key(p) for p in (*parts, *stream)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


@dataclass(frozen=True)
class Word:
    """A word in the generators, optionally remembering its increments.

    ``increments`` (when present) lists the sampled steps γ₁, …, γₙ in time
    order; ``letters`` is then the written form of the left product γₙ⋯γ₁.
    """

    letters: tuple[int, ...] = ()
    increments: tuple["Word", ...] | None = None

    def __len__(self):
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def __add__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)

    def inverse(self) -> "Word":
        return Word(tuple(-x for x in reversed(self.letters)))

    def ordered(self, order: str = "left") -> "Word":
        """Written form of γₙ⋯γ₁ (``left``) or γ₁⋯γₙ (``right``)."""
        if order not in ("left", "right"):
            raise ValueError(f"order must be 'left' or 'right', got {order!r}")
        if self.increments is None or order == "left":
            if self.increments is None and order == "right":
                return Word(tuple(reversed(self.letters)))
            return Word(self.letters, self.increments)
        out: list[int] = []
        for inc in self.increments:
            out.extend(inc.letters)
        return Word(tuple(out), self.increments)

    def to_text(self, names: Sequence[str]) -> str:
        return " ".join(names[x - 1] if x > 0 else names[-x - 1].upper() for x in self.letters)


IDENTITY = Word()


def parse_word(text: str, names: Sequence[str]) -> Word:
    """``"a b A"`` → letters; lowercase is a generator, uppercase its inverse."""
    letters = []
    for tok in text.split():
        if tok in names:
            letters.append(names.index(tok) + 1)
        elif tok.lower() in names and tok != tok.lower():
            letters.append(-(names.index(tok.lower()) + 1))
        else:
            raise ConfigError(f"unknown generator token {tok!r} in word {text!r}")
    return Word(tuple(letters))


@dataclass(frozen=True)
class StepMeasure:
    """Finitely supported probability measure on words."""

    atoms: tuple[Word, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.atoms) != len(self.weights) or not self.atoms:
            raise ConfigError("measure needs matching non-empty atoms and weights")
        if any(not (w > 0) for w in self.weights):
            raise ConfigError("measure weights must be positive")
        total = float(np.sum(self.weights))
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ConfigError(f"measure weights sum to {total!r}, not 1")

    @property
    def symmetric(self) -> bool:
        table: dict[tuple, float] = {}
        for a, w in zip(self.atoms, self.weights):
            table[a.letters] = table.get(a.letters, 0.0) + w
        return all(abs(table.get(Word(k).inverse().letters, 0.0) - w) <= WEIGHT_TOL
                   for k, w in table.items())

    @property
    def max_letter(self) -> int:
        return max((abs(x) for a in self.atoms for x in a.letters), default=0)

    def as_dict(self) -> dict:
        return {a.letters: w for a, w in zip(self.atoms, self.weights)}

    def to_config(self, names: Sequence[str]) -> dict:
        return {"measure": [{"word": a.to_text(names), "p": w}
                            for a, w in zip(self.atoms, self.weights)]}


def uniform_symmetric(k: int) -> StepMeasure:
    """Weight 1/(2k) on each generator and each inverse."""
    if k < 1:
        raise ValueError("need at least one generator")
    atoms = []
    for j in range(1, k + 1):
        atoms += [Word((j,)), Word((-j,))]
    return StepMeasure(tuple(atoms), tuple([1.0 / (2 * k)] * (2 * k)))


def reversed_measure(mu: StepMeasure) -> StepMeasure:
    """μ̌(γ) = μ(γ⁻¹)."""
    return StepMeasure(tuple(a.inverse() for a in mu.atoms), mu.weights)


def reaches_all_generators(mu: StepMeasure, k: int) -> bool:
    """Heuristic check that supp μ can generate the group: the symmetric closure
    of the letters used by the atoms contains all ``k`` generators.

    Whether the support generates the group as a semigroup is undecidable in
    general; that stays the caller's obligation.
    """
    used = {abs(x) for a in mu.atoms for x in a.letters}
    return used >= set(range(1, k + 1))


def measure_from_config(block, names: Sequence[str]) -> StepMeasure:
    """Decode the ``walk`` JSON block."""
    if block is None:
        return uniform_symmetric(len(names))
    m = block.get("measure", "uniform-symmetric") if isinstance(block, dict) else block
    if m == "uniform-symmetric":
        return uniform_symmetric(len(names))
    if not isinstance(m, list) or not m:
        raise ConfigError("walk.measure must be 'uniform-symmetric' or a list of {word, p}")
    atoms, weights = [], []
    for item in m:
        if not isinstance(item, dict) or "word" not in item or "p" not in item:
            raise ConfigError(f"bad measure atom {item!r}")
        atoms.append(parse_word(item["word"], names))
        weights.append(float(item["p"]))
    mu = StepMeasure(tuple(atoms), tuple(weights))
    if not reaches_all_generators(mu, len(names)):
        warnings.warn("the walk's support does not use every generator; it cannot generate the group",
                      RuntimeWarning, stacklevel=2)
    return mu


# -- sampling ------------------------------------------------------------------

def sample_indices(mu: StepMeasure, n: int, seed, *stream) -> np.ndarray:
    """``n`` i.i.d. atom indices, in time order γ₁, …, γₙ."""
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = make_rng(seed, *stream)
    if n == 0:
        return np.zeros(0, dtype=np.intp)
    cdf = np.cumsum(mu.weights)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(n), side="right").astype(np.intp)


def sample_word(mu: StepMeasure, n: int, seed, *stream) -> Word:
    """Product of ``n`` independent increments; letters are in left order γₙ⋯γ₁."""
    idx = sample_indices(mu, n, seed, *stream)
    incs = tuple(mu.atoms[i] for i in idx)
    letters: list[int] = []
    for inc in reversed(incs):
        letters.extend(inc.letters)
    return Word(tuple(letters), incs)


def letters_array(words: Iterable[Word], order: str = "left", length: int | None = None) -> np.ndarray:
    """Stack words as an ``(W, L)`` letter array padded with 0 (identity)."""
    rows = [w.ordered(order).letters for w in words]
    L = max((len(r) for r in rows), default=0) if length is None else length
    out = np.zeros((len(rows), L), dtype=np.intp)
    for i, r in enumerate(rows):
        if len(r) > L:
            raise ValueError("word longer than requested length")
        out[i, L - len(r):] = r  # right-aligned: padding is applied last in time
    return out


def sample_letter_block(mu: StepMeasure, n: int, trials: int, seed, *stream,
                        order: str = "left") -> np.ndarray:
    """Letter array ``(trials, L)`` of ``trials`` independent length-``n`` walks.

    Trial ``t`` uses stream ``(seed, *stream, t)``.
    """
    lengths = {len(a) for a in mu.atoms}
    idx = np.stack([sample_indices(mu, n, seed, *stream, t) for t in range(trials)]) \
        if trials else np.zeros((0, n), dtype=np.intp)
    if lengths == {1}:
        table = np.array([a.letters[0] for a in mu.atoms], dtype=np.intp)
        lets = table[idx]
        return lets[:, ::-1].copy() if order == "left" else lets
    words = [Word(tuple(x for i in (row[::-1] if order == "left" else row)
                        for x in mu.atoms[i].letters)) for row in idx]
    return letters_array(words, "left")


def letters_to_slots(letters: np.ndarray) -> np.ndarray:
    """Map signed letters to kernel slot indices (``-1`` for padding)."""
    letters = np.asarray(letters, dtype=np.intp)
    slots = np.where(letters > 0, 2 * (letters - 1), 2 * (-letters - 1) + 1)
    return np.where(letters == 0, -1, slots).astype(np.intp)
