"""Holomorphic families of matrices declared as text.

A family is a JSON block::

    {"dimension": 2,
     "generators": {"a": [["l", "0"], ["0", "1/l"]]},
     "poles": [[0, 0]]}

Each matrix entry is an expression in the parameter ``l``. The grammar is
infix with precedence ``^`` > unary ``-`` > ``* /`` > ``+ -``; literals are
decimals with an optional ``i`` suffix (``2.5i``), ``i`` alone is the
imaginary unit, and exponents are integer literals (negative ones only on
``l`` or on a nonzero constant).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    ConfigError,
    DeterminantError,
    DimensionError,
    DslSyntaxError,
    PoleError,
    SingularError,
    UnknownSymbol,
)

POLE_GUARD = 1e-12
DET_TOL = 1e-8
INVERSE_RESIDUAL_TOL = 1e-10
DET_SAMPLES = 32
DEFAULT_DOMAIN = (-2.0, 2.0, -2.0, 2.0)
_DET_SAMPLE_SEED = 0x5EED


# -- expression trees ----------------------------------------------------------

@dataclass(frozen=True)
class Expr:
    """Node of an expression tree.

    ``kind`` is one of ``const``, ``var``, ``neg``, ``+``, ``-``, ``*``, ``/``, ``^``.
    For ``const`` the literal sits in ``value``; for ``^`` the integer exponent does.
    """

    kind: str
    children: tuple = ()
    value: complex | int | None = None

    def __call__(self, lam):
        return eval_expr(self, lam)

    def __str__(self):
        return to_text(self)


def const(z) -> Expr:
    return Expr("const", (), complex(z))


VAR = Expr("var")


def eval_expr(e: Expr, lam):
    """Evaluate at a scalar or an array of parameters (numpy broadcasting)."""
    k = e.kind
    if k == "const":
        return e.value
    if k == "var":
        return lam
    if k == "neg":
        return -eval_expr(e.children[0], lam)
    if k == "^":
        base = eval_expr(e.children[0], lam)
        p = e.value
        if p >= 0:
            return base ** p
        return 1.0 / base ** (-p)
    a = eval_expr(e.children[0], lam)
    b = eval_expr(e.children[1], lam)
    if k == "+":
        return a + b
    if k == "-":
        return a - b
    if k == "*":
        return a * b
    if k == "/":
        return a / b
    raise ValueError(f"unknown node kind {k!r}")


def _fmt_float(x: float) -> str:
    s = repr(float(x))
    if "inf" in s or "nan" in s:
        raise ValueError("non-finite literal")
    return s


def _fmt_const(z: complex) -> str:
    re_, im_ = z.real, z.imag
    if im_ == 0.0:
        s = _fmt_float(abs(re_))
        return f"(-{s})" if math_signbit(re_) else s
    if re_ == 0.0 and not math_signbit(re_):
        s = _fmt_float(abs(im_)) + "i"
        return f"(-{s})" if math_signbit(im_) else s
    sign = "-" if math_signbit(im_) else "+"
    r = _fmt_float(abs(re_))
    r = f"-{r}" if math_signbit(re_) else r
    return f"({r}{sign}{_fmt_float(abs(im_))}i)"


def math_signbit(x: float) -> bool:
    return bool(np.signbit(x))


def to_text(e: Expr) -> str:
    """Print an expression so that parsing the result gives the same tree values."""
    k = e.kind
    if k == "const":
        return _fmt_const(e.value)
    if k == "var":
        return "l"
    if k == "neg":
        return f"(-{to_text(e.children[0])})"
    if k == "^":
        return f"({to_text(e.children[0])}^{e.value})"
    return f"({to_text(e.children[0])}{k}{to_text(e.children[1])})"


# -- tokenizer / parser --------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?i?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str  # num | imag | var | op | end
    text: str
    pos: int
    value: complex | None = None


def tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise DslSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        s = m.group()
        if kind == "num":
            if s.endswith("i"):
                toks.append(_Tok("num", s, pos, complex(0.0, float(s[:-1]))))
            else:
                toks.append(_Tok("num", s, pos, complex(float(s), 0.0)))
        elif kind == "ident":
            if s == "l":
                toks.append(_Tok("var", s, pos))
            elif s == "i":
                toks.append(_Tok("num", s, pos, 1j))
            else:
                raise UnknownSymbol(f"unknown symbol {s!r}", text, pos)
        elif kind == "op":
            toks.append(_Tok("op", s, pos))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        return DslSyntaxError(msg, self.text, tok.pos)

    def parse(self) -> Expr:
        if self.peek().kind == "end":
            raise self.error("empty expression")
        e = self.sum()
        if self.peek().kind != "end":
            raise self.error(f"unexpected token {self.peek().text!r}")
        return e

    def sum(self) -> Expr:
        e = self.product()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.take().text
            e = Expr(op, (e, self.product()))
        return e

    def product(self) -> Expr:
        e = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.take().text
            e = Expr(op, (e, self.unary()))
        return e

    def unary(self) -> Expr:
        t = self.peek()
        if t.kind == "op" and t.text == "-":
            self.take()
            return Expr("neg", (self.unary(),))
        if t.kind == "op" and t.text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            caret = self.take()
            neg = False
            if self.peek().kind == "op" and self.peek().text == "-":
                self.take()
                neg = True
            t = self.peek()
            if t.kind != "num" or not re.fullmatch(r"\d+", t.text):
                raise self.error("exponent must be an integer literal")
            self.take()
            p = int(t.text)
            if neg:
                p = -p
                ok = base.kind == "var" or (base.kind == "const" and base.value != 0)
                if not ok:
                    raise DslSyntaxError(
                        "negative exponent allowed only on l or a nonzero constant",
                        self.text, caret.pos)
            if self.peek().kind == "op" and self.peek().text == "^":
                raise self.error("chained exponent")
            return Expr("^", (base,), p)
        return base

    def atom(self) -> Expr:
        t = self.take()
        if t.kind == "num":
            return Expr("const", (), t.value)
        if t.kind == "var":
            return VAR
        if t.kind == "op" and t.text == "(":
            if self.peek().kind == "op" and self.peek().text == ")":
                raise self.error("empty parentheses")
            e = self.sum()
            if not (self.peek().kind == "op" and self.peek().text == ")"):
                raise self.error("expected ')'")
            self.take()
            return e
        if t.kind == "end":
            raise DslSyntaxError("unexpected end of expression", self.text, t.pos)
        raise DslSyntaxError(f"unexpected token {t.text!r}", self.text, t.pos)


def parse_expr(text: str) -> Expr:
    return _Parser(text).parse()


# -- families ------------------------------------------------------------------

def _as_lams(lam) -> np.ndarray:
    return np.atleast_1d(np.asarray(lam, dtype=complex)).ravel()


class Representation:
    """Common evaluator surface shared by parsed families and derived ones.

    Subclasses provide ``dimension``, ``generators`` and
    ``_raw_slot_images(lams) -> (images, bad)`` where ``images`` has shape
    ``(2k, P, d, d)``: slot ``2j`` holds generator ``j`` and slot ``2j + 1``
    its inverse.
    """

    dimension: int
    generators: tuple[str, ...]

    @property
    def num_slots(self) -> int:
        return 2 * len(self.generators)

    def slot_of(self, gen, inverse=False) -> int:
        if isinstance(gen, (int, np.integer)):
            if gen == 0:
                raise ValueError("letter 0 is not a generator")
            j, inv = abs(int(gen)) - 1, gen < 0
        else:
            if gen in self.generators:
                j, inv = self.generators.index(gen), False
            elif gen.lower() in self.generators and gen != gen.lower():
                j, inv = self.generators.index(gen.lower()), True
            else:
                raise KeyError(f"unknown generator {gen!r}")
        if j >= len(self.generators):
            raise KeyError(f"generator index {j + 1} out of range")
        return 2 * j + (inv ^ bool(inverse))

    def slot_images(self, lam, strict=True):
        """Images of all generators and inverses at each parameter.

        Returns ``(images, bad)``; with ``strict`` a bad node raises instead.
        """
        return self._raw_slot_images(_as_lams(lam), strict)

    def matrix(self, gen, lam, inverse=False) -> np.ndarray:
        images, _ = self.slot_images(lam, strict=True)
        return images[self.slot_of(gen, inverse), 0].copy()

    def slot_matrices(self, lam) -> np.ndarray:
        """``(2k, d, d)`` images at a single parameter."""
        images, _ = self.slot_images(lam, strict=True)
        return images[:, 0]


def _invert_checked(mats: np.ndarray, strict: bool):
    """Batched inverse with the residual contract; returns (inverse, bad)."""
    d = mats.shape[-1]
    inv = np.empty_like(mats)
    bad = ~np.isfinite(mats).all(axis=(-2, -1))
    good = ~bad
    if d == 2 and good.any():
        a, b, c, e = mats[..., 0, 0], mats[..., 0, 1], mats[..., 1, 0], mats[..., 1, 1]
        with np.errstate(all="ignore"):
            det = a * e - b * c
            inv[..., 0, 0], inv[..., 0, 1] = e / det, -b / det
            inv[..., 1, 0], inv[..., 1, 1] = -c / det, a / det
        bad |= ~np.isfinite(inv).all(axis=(-2, -1))
    elif good.any():
        try:
            inv[good] = np.linalg.inv(mats[good])
        except np.linalg.LinAlgError:
            for idx in np.flatnonzero(good):
                try:
                    inv[idx] = np.linalg.inv(mats[idx])
                except np.linalg.LinAlgError:
                    bad[idx] = True
    inv[bad] = np.eye(d)
    with np.errstate(all="ignore"):
        resid = np.linalg.norm(mats @ inv - np.eye(d), axis=(-2, -1))
    bad |= ~(resid <= INVERSE_RESIDUAL_TOL)
    if strict and bad.any():
        raise SingularError(
            f"inverse residual exceeds {INVERSE_RESIDUAL_TOL:g} "
            f"(max residual {np.nanmax(resid):.3g})")
    return inv, bad


@dataclass(frozen=True)
class RepFamily(Representation):
    """A parsed, validated holomorphic family λ ↦ ρ_λ. Immutable."""

    dimension: int
    generators: tuple[str, ...]
    entries: tuple  # per generator: tuple of d rows of d Expr
    poles: tuple[complex, ...] = ()
    domain: tuple[float, float, float, float] = DEFAULT_DOMAIN
    source: dict = field(default=None, compare=False, repr=False)

    def generator_values(self, lams: np.ndarray) -> np.ndarray:
        """``(k, P, d, d)`` generator images, no validation."""
        d = self.dimension
        out = np.empty((len(self.generators), lams.size, d, d), dtype=complex)
        with np.errstate(all="ignore"):
            for g, rows in enumerate(self.entries):
                for r in range(d):
                    for c in range(d):
                        out[g, :, r, c] = eval_expr(rows[r][c], lams)
        return out

    def pole_mask(self, lams: np.ndarray) -> np.ndarray:
        bad = np.zeros(lams.shape, dtype=bool)
        for p in self.poles:
            bad |= np.abs(lams - p) <= POLE_GUARD
        return bad

    def _raw_slot_images(self, lams, strict):
        near = self.pole_mask(lams)
        if strict and near.any():
            raise PoleError(f"parameter {lams[near][0]} within {POLE_GUARD:g} of a declared pole")
        gens = self.generator_values(lams)
        k, P, d, _ = gens.shape
        bad = near | ~np.isfinite(gens).all(axis=(0, 2, 3))
        if strict and bad.any():
            raise PoleError(f"non-finite matrix entry at parameter {lams[bad][0]}")
        gens[:, bad] = np.eye(d)
        inv, ibad = _invert_checked(gens.reshape(k * P, d, d), strict)
        bad |= ibad.reshape(k, P).any(axis=0)
        images = np.empty((2 * k, P, d, d), dtype=complex)
        images[0::2] = gens
        images[1::2] = inv.reshape(k, P, d, d)
        images[:, bad] = np.eye(d)
        return images, bad

    def to_config(self) -> dict:
        d = {
            "dimension": self.dimension,
            "generators": {
                name: [[to_text(e) for e in row] for row in rows]
                for name, rows in zip(self.generators, self.entries)
            },
            "poles": [[p.real, p.imag] for p in self.poles],
        }
        if self.domain != DEFAULT_DOMAIN:
            d["domain"] = list(self.domain)
        return d


class DualFamily(Representation):
    """λ ↦ ρ*_λ with ρ*(γ) = ρ(γ⁻¹)ᵗ, evaluated generator-wise."""

    def __init__(self, base: Representation):
        self.base = base
        self.dimension = base.dimension
        self.generators = base.generators

    def _raw_slot_images(self, lams, strict):
        images, bad = self.base._raw_slot_images(lams, strict)
        dual = np.empty_like(images)
        dual[0::2] = np.swapaxes(images[1::2], -1, -2)
        dual[1::2] = np.swapaxes(images[0::2], -1, -2)
        return dual, bad


def dual_family(family: Representation) -> Representation:
    if isinstance(family, DualFamily):
        return family.base
    return DualFamily(family)


def evaluate(family: Representation, gen, lam: complex, inverse: bool = False) -> np.ndarray:
    """ρ_λ(g) (or its inverse) as a ``d × d`` complex array."""
    return family.matrix(gen, lam, inverse)


def _parse_complex_pair(v, what):
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    raise ConfigError(f"{what}: expected [re, im], got {v!r}")


def family_from_dict(cfg: dict) -> RepFamily:
    if not isinstance(cfg, dict):
        raise ConfigError("family block must be a JSON object")
    for key in ("dimension", "generators"):
        if key not in cfg:
            raise ConfigError(f"family block is missing {key!r}")
    d = cfg["dimension"]
    if not isinstance(d, int) or d < 2:
        raise DimensionError(f"dimension must be an integer >= 2, got {d!r}")
    gens = cfg["generators"]
    if not isinstance(gens, dict) or not gens:
        raise ConfigError("generators must be a non-empty object")
    names, entries = [], []
    for name, rows in gens.items():
        if not re.fullmatch(r"[a-z][a-z0-9_]*", name):
            raise ConfigError(f"generator name {name!r} must be lowercase (uppercase denotes inverse)")
        if not isinstance(rows, list) or len(rows) != d:
            raise DimensionError(f"generator {name!r}: expected {d} rows")
        parsed_rows = []
        for r, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != d:
                raise DimensionError(f"generator {name!r} row {r}: expected {d} entries")
            parsed = []
            for c, s in enumerate(row):
                if isinstance(s, (int, float)):
                    s = repr(s)
                if not isinstance(s, str):
                    raise ConfigError(f"generator {name!r}[{r}][{c}]: entry must be a string")
                try:
                    parsed.append(parse_expr(s))
                except DslSyntaxError as exc:
                    exc.args = (f"generator {name!r}[{r}][{c}]: {exc.args[0]}",)
                    raise
            parsed_rows.append(tuple(parsed))
        names.append(name)
        entries.append(tuple(parsed_rows))
    poles = tuple(_parse_complex_pair(p, "poles") for p in cfg.get("poles", []))
    domain = tuple(float(x) for x in cfg.get("domain", DEFAULT_DOMAIN))
    if len(domain) != 4 or not (domain[0] < domain[1] and domain[2] < domain[3]):
        raise ConfigError(f"domain must be [re0, re1, im0, im1] with positive extents, got {domain}")
    fam = RepFamily(d, tuple(names), tuple(entries), poles, domain, source=cfg)
    _check_determinants(fam)
    return fam


def _det_sample_points(fam: RepFamily, count=DET_SAMPLES) -> np.ndarray:
    rng = np.random.default_rng(_DET_SAMPLE_SEED)
    re0, re1, im0, im1 = fam.domain
    guard = 1e-3 * max(re1 - re0, im1 - im0)
    pts = []
    while len(pts) < count:
        z = complex(rng.uniform(re0, re1), rng.uniform(im0, im1))
        if all(abs(z - p) > guard for p in fam.poles):
            pts.append(z)
    return np.array(pts)


def _check_determinants(fam: RepFamily) -> None:
    lams = _det_sample_points(fam)
    gens = fam.generator_values(lams)
    with np.errstate(all="ignore"):
        dets = np.linalg.det(np.where(np.isfinite(gens), gens, 0.0))
    finite = np.isfinite(gens).all(axis=(2, 3))
    for g, name in enumerate(fam.generators):
        dev = np.abs(dets[g] - 1.0)
        if not finite[g].all() or (dev > DET_TOL).any():
            worst = int(np.nanargmax(np.where(finite[g], dev, np.inf)))
            raise DeterminantError(
                f"generator {name!r}: |det - 1| = {dev[worst]:.3g} > {DET_TOL:g} "
                f"at sampled parameter {lams[worst]:.6g}")


def parse_family(text) -> RepFamily:
    """Parse a JSON family block (string or already-decoded dict)."""
    if isinstance(text, (str, bytes)):
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
    else:
        cfg = text
    if isinstance(cfg, dict) and "family" in cfg and "generators" not in cfg:
        cfg = cfg["family"]
    return family_from_dict(cfg)


def family_matrices_text(family: RepFamily) -> str:
    return json.dumps(family.to_config(), sort_keys=True)


def words_as_matrix(family: Representation, letters: Sequence[int], lam) -> np.ndarray:
    """Plain (unscaled) product of letters in written order; for tests and oracles."""
    m = np.eye(family.dimension, dtype=complex)
    images = family.slot_matrices(lam)
    for x in letters:
        m = m @ images[family.slot_of(int(x))]
    return m
