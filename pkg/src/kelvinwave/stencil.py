"""Leapfrog stencil kernels with compiled and pure-NumPy backends.

The compiled Cython kernel (``kelvinwave._stencil``) is used when available;
otherwise the NumPy implementation takes over.  Both compute, for every
interior node,

    out = 2 * v_curr - v_prev + lam2 * sum_axes (v_curr[+1] - 2 v_curr + v_curr[-1])

and zero the boundary ring of ``out``.  Results are independent of the worker
count: each output element is written by exactly one thread from read-only
inputs.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ConfigError

try:
    from . import _stencil

    HAS_COMPILED = True
except ImportError:  # pragma: no cover - depends on build environment
    _stencil = None
    HAS_COMPILED = False


def backend_name(backend: str = "auto") -> str:
    """Resolve a backend request ('auto', 'compiled', 'numpy') to a concrete one."""
    if backend == "auto":
        backend = os.environ.get("KW_BACKEND", "auto")
    if backend == "auto":
        return "compiled" if HAS_COMPILED else "numpy"
    if backend == "compiled" and not HAS_COMPILED:
        raise RuntimeError("compiled stencil kernel is not available; rebuild the extension")
    if backend not in ("compiled", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    return backend


def default_workers() -> int:
    """Worker count for the compiled kernel; the KW_THREADS env var overrides."""
    env = os.environ.get("KW_THREADS")
    if env is not None:
        try:
            workers = int(env)
        except ValueError:
            raise ConfigError(f"KW_THREADS must be a positive integer, got {env!r}") from None
        if workers < 1:
            raise ConfigError("KW_THREADS must be a positive integer")
        return workers
    return 1


def leapfrog_interior(v_prev: np.ndarray, v_curr: np.ndarray, out: np.ndarray,
                      lam2: float, backend: str = "auto", workers: int | None = None) -> None:
    """One leapfrog update of all interior nodes into ``out`` (boundary zeroed)."""
    if workers is None:
        workers = default_workers()
    resolved = backend_name(backend)
    if resolved == "compiled" and v_curr.ndim <= 3:
        _compiled_step(v_prev, v_curr, out, lam2, workers)
    else:
        _numpy_step(v_prev, v_curr, out, lam2)


def _compiled_step(v_prev, v_curr, out, lam2, workers):
    if v_curr.ndim == 1:
        _stencil.step_1d(v_prev, v_curr, out, lam2, workers)
    elif v_curr.ndim == 2:
        _stencil.step_2d(v_prev, v_curr, out, lam2, workers)
    else:
        _stencil.step_3d(v_prev, v_curr, out, lam2, workers)


def _numpy_step(v_prev, v_curr, out, lam2):
    ndim = v_curr.ndim
    out.fill(0.0)
    inner = (slice(1, -1),) * ndim
    lap = -2.0 * ndim * v_curr[inner]
    for axis in range(ndim):
        hi = tuple(slice(2, None) if a == axis else slice(1, -1) for a in range(ndim))
        lo = tuple(slice(None, -2) if a == axis else slice(1, -1) for a in range(ndim))
        lap = lap + v_curr[hi] + v_curr[lo]
    out[inner] = 2.0 * v_curr[inner] - v_prev[inner] + lam2 * lap
