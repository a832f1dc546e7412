"""Reference families used by the test-suite, the acceptance runs and the CLI.

Each entry is a complete run config (``schema_version``, ``family``,
``walk``); ``load`` parses one into ``(RepFamily, StepMeasure)``. JSON copies
live in ``bifurclab/data`` and are regenerated with ``write_data_files``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .dsl import RepFamily, parse_family
from .walk import StepMeasure, measure_from_config

SCHEMA_VERSION = 1
DATA_DIR = Path(__file__).with_name("data")

# Schottky pair: a = diag(λ, 1/λ), b = R a R⁻¹ with R the rotation by π/4.
# At λ = 3 the ping-pong disks in the chart z = x₀/x₁ are |z| < 1/3, |z| > 3
# (for a⁻¹ and a) and |z ∓ 1.25| < 0.75 (for b and b⁻¹).
SCHOTTKY_LAMBDA = 3.0
SCHOTTKY_DISKS = (  # (center, radius, inside?) ; inside=False means |z - c| > r
    (0.0, 1.0 / 3.0, True),
    (0.0, 3.0, False),
    (1.25, 0.75, True),
    (-1.25, 0.75, True),
)

LINEAR_CENTER = complex(0.2, 0.1)


def _rotation3(a: float, b: float, c: float) -> np.ndarray:
    def rz(t):
        return np.array([[math.cos(t), -math.sin(t), 0], [math.sin(t), math.cos(t), 0], [0, 0, 1]])

    def rx(t):
        return np.array([[1, 0, 0], [0, math.cos(t), -math.sin(t)], [0, math.sin(t), math.cos(t)]])
    return rz(a) @ rx(b) @ rz(c)


def _num(x: float) -> str:
    return repr(float(x))


def _d3_conjugate_entries(R: np.ndarray) -> list[list[str]]:
    """Entries of R·diag(λ, 1, 1/λ)·Rᵀ as DSL strings."""
    rows = []
    for i in range(3):
        row = []
        for j in range(3):
            c0, c1, c2 = R[i, 0] * R[j, 0], R[i, 1] * R[j, 1], R[i, 2] * R[j, 2]
            row.append(f"({_num(c0)})*l + ({_num(c1)}) + ({_num(c2)})/l")
        rows.append(row)
    return rows


def _config(family: dict, walk="uniform-symmetric", **extra) -> dict:
    cfg = {"schema_version": SCHEMA_VERSION, "family": family, "walk": {"measure": walk}}
    cfg.update(extra)
    return cfg


def _build() -> dict:
    c1, s1 = math.cos(1.0), math.sin(1.0)
    c7, s7 = math.cos(0.7), math.sin(0.7)
    R3 = _rotation3(0.7, 0.5, 1.1)
    conj_a = [["3", "-4/3*l"], ["0", "1/3"]]
    conj_b = [["5/3 + 2/3*l", "4/3 - l^2/3"], ["4/3", "5/3 - 2/3*l"]]
    return {
        "biased_z": _config(
            {"dimension": 2, "generators": {"a": [["l", "0"], ["0", "1/l"]]},
             "poles": [[0, 0]], "domain": [0.5, 4, -2, 2]},
            [{"word": "a", "p": 0.75}, {"word": "A", "p": 0.25}],
            note="diagonal family over Z with drift 2p-1 = 1/2"),
        "symmetric_z": _config(
            {"dimension": 2, "generators": {"a": [["l", "0"], ["0", "1/l"]]},
             "poles": [[0, 0]], "domain": [0.5, 4, -2, 2]},
            note="diagonal family over Z, symmetric walk"),
        "schottky": _config(
            {"dimension": 2,
             "generators": {"a": [["l", "0"], ["0", "1/l"]],
                            "b": [["(l + 1/l)/2", "(l - 1/l)/2"], ["(l - 1/l)/2", "(l + 1/l)/2"]]},
             "poles": [[0, 0]], "domain": [1.5, 5, -2, 2]},
            note="b is a conjugated by the rotation by pi/4"),
        "riley": _config(
            {"dimension": 2,
             "generators": {"a": [["1", "2"], ["0", "1"]], "b": [["1", "0"], ["l", "1"]]},
             "domain": [-1, 1, -1, 1]},
            note="two parabolics, tr(ab) = 2 + 2l"),
        "conjugation": _config(
            {"dimension": 2, "generators": {"a": conj_a, "b": conj_b}, "domain": [-1, 1, -1, 1]},
            note="C(l) r0 C(l)^-1 with C(l) = [[1, l/2], [0, 1]] and r0 the Schottky pair at 3"),
        "su2": _config(
            {"dimension": 2,
             "generators": {"a": [[_num(c1), _num(-s1)], [_num(s1), _num(c1)]],
                            "b": [[f"{_num(c7)} + {_num(s7)}i", "0"], ["0", f"{_num(c7)} - {_num(s7)}i"]]},
             "domain": [-1, 1, -1, 1]},
            note="constant SU(2)-valued family"),
        "identity": _config(
            {"dimension": 2, "generators": {"a": [["1", "0"], ["0", "1"]]}},
            note="trivial representation"),
        "diag_rot3": _config(
            {"dimension": 3,
             "generators": {"a": [["l", "0", "0"], ["0", "1", "0"], ["0", "0", "1/l"]],
                            "b": _d3_conjugate_entries(R3)},
             "poles": [[0, 0]], "domain": [1.5, 4, -1, 1]},
            note="d = 3: diag(l, 1, 1/l) and its conjugate by a fixed rotation"),
        "linear": _config(
            {"dimension": 2,
             "generators": {"a": [["1", f"l - ({_num(LINEAR_CENTER.real)} + {_num(LINEAR_CENTER.imag)}i)"],
                                  ["0", "1"]]},
             "domain": [-1, 1, -1, 1]},
            note="a e2 = (l - l0, 1): graph of a degree-one map"),
    }


CONFIGS = _build()


def names() -> list[str]:
    return sorted(CONFIGS)


def config(name: str) -> dict:
    if name not in CONFIGS:
        raise KeyError(f"unknown reference family {name!r}; have {names()}")
    return json.loads(json.dumps(CONFIGS[name]))


def load(name: str) -> tuple[RepFamily, StepMeasure]:
    cfg = config(name)
    fam = parse_family(cfg["family"])
    return fam, measure_from_config(cfg.get("walk"), fam.generators)


def write_data_files(directory: Path = DATA_DIR) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for name, cfg in CONFIGS.items():
        (directory / f"{name}.json").write_text(json.dumps(cfg, indent=2) + "\n")
