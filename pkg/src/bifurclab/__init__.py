"""Lyapunov exponents, bifurcation currents and proximal stability for
holomorphic families of SL(d, C) representations driven by random walks."""

__version__ = "0.1.0"

from .kernels import DEFAULT_BACKEND as BACKEND  # noqa: E402
