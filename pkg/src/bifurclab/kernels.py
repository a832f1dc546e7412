"""Backend selection for the hot kernels.

The compiled extension ``_ckernels`` is used when it imports; otherwise the
numpy implementation in ``_pykernels``. Set ``BIFURCLAB_PURE_PYTHON=1`` to
force the fallback. Work is split over words into ``threads`` contiguous
chunks and concatenated in order, so results never depend on the thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _pykernels

_native = None
if os.environ.get("BIFURCLAB_PURE_PYTHON") != "1":
    try:
        from . import _ckernels as _native
    except ImportError:  # extension not built
        _native = None

BACKENDS = {"python": _pykernels}
if _native is not None:
    BACKENDS["cython"] = _native

DEFAULT_BACKEND = "cython" if _native is not None else "python"
_state = {"backend": DEFAULT_BACKEND, "threads": None}


def set_backend(name: str) -> None:
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable (have {sorted(BACKENDS)})")
    _state["backend"] = name


def get_backend() -> str:
    return _state["backend"]


def set_threads(n: int | None) -> None:
    _state["threads"] = None if n is None else max(1, int(n))


def get_threads() -> int:
    if _state["threads"] is not None:
        return _state["threads"]
    try:
        return max(1, int(os.environ.get("BIFURCLAB_THREADS", "1")))
    except ValueError:
        return 1


def _impl(backend):
    return BACKENDS[backend or _state["backend"]]


def _prep(gens, slots):
    gens = np.ascontiguousarray(gens, dtype=complex)
    if gens.ndim == 3:
        gens = gens[:, None]
    slots = np.ascontiguousarray(slots, dtype=np.intp)
    if slots.ndim == 1:
        slots = slots[None]
    return gens, slots


def _chunked(fn, slots, *, n_out):
    """Run ``fn(slot_chunk)`` over contiguous word chunks; concatenate along axis 0."""
    W = slots.shape[0]
    threads = min(get_threads(), max(W, 1))
    if threads <= 1 or W < 2:
        return fn(slots)
    bounds = np.linspace(0, W, threads + 1).astype(int)
    chunks = [slots[a:b] for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ThreadPoolExecutor(max_workers=len(chunks)) as ex:
        parts = list(ex.map(fn, chunks))
    if n_out == 1:
        return np.concatenate(parts, axis=0)
    return tuple(np.concatenate([p[i] for p in parts], axis=0) for i in range(n_out))


def scaled_products(gens, slots, checkpoints=(), backend=None):
    """See ``_pykernels.scaled_products``."""
    gens, slots = _prep(gens, slots)
    impl = _impl(backend)
    return _chunked(lambda s: impl.scaled_products(gens, np.ascontiguousarray(s), checkpoints),
                    slots, n_out=3)


def scaled_vector_products(gens, slots, v0, backend=None):
    gens, slots = _prep(gens, slots)
    impl = _impl(backend)
    return _chunked(lambda s: impl.scaled_vector_products(gens, np.ascontiguousarray(s), v0),
                    slots, n_out=2)


def qr_exponents(gens, slots, k, backend=None):
    gens, slots = _prep(gens, slots)
    impl = _impl(backend)
    return _chunked(lambda s: impl.qr_exponents(gens, np.ascontiguousarray(s), int(k)),
                    slots, n_out=1)


def eigvals_batch(mats, backend=None):
    mats = np.ascontiguousarray(mats, dtype=complex)
    shape = mats.shape
    flat = mats.reshape(-1, shape[-2], shape[-1])
    impl = _impl(backend)
    out = _chunked(lambda m: impl.eigvals_batch(np.ascontiguousarray(m)), flat, n_out=1)
    return out.reshape(shape[:-1])


def projective_chain(gens, slots, x0, burn, thin, count, backend=None):
    gens = np.ascontiguousarray(gens, dtype=complex)
    slots = np.ascontiguousarray(slots, dtype=np.intp)
    impl = _impl(backend)
    return _chunked(lambda s: impl.projective_chain(gens, np.ascontiguousarray(s),
                                                    x0, burn, thin, count),
                    slots, n_out=1)
