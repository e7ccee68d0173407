"""Backend selection for the matched-filter scan hot loop.

Two interchangeable implementations exist: a compiled Cython kernel
(``isacguard._scan``) and a chunked NumPy/BLAS fallback.  The compiled one is
preferred when importable; ``ISACGUARD_BACKEND=py`` or ``=cy`` overrides the
choice.  Both return, per snapshot, the index of the first power maximum over
the grid plus the peak power and its two neighbours.
"""
from __future__ import annotations

import os

import numpy as np

try:
    from . import _scan as _compiled
except ImportError:  # extension not built
    _compiled = None

HAVE_COMPILED = _compiled is not None

_CHUNK = 512  # snapshots per BLAS block; keeps the power matrix < ~20 MB


def available_backends() -> tuple[str, ...]:
    return ("cy", "py") if HAVE_COMPILED else ("py",)


def active_backend() -> str:
    forced = os.environ.get("ISACGUARD_BACKEND", "").strip().lower()
    if forced == "py":
        return "py"
    if forced == "cy":
        if not HAVE_COMPILED:
            raise RuntimeError("ISACGUARD_BACKEND=cy but the compiled kernel is not built")
        return "cy"
    if forced:
        raise RuntimeError(f"unknown ISACGUARD_BACKEND {forced!r} (use 'py' or 'cy')")
    return "cy" if HAVE_COMPILED else "py"


def worker_count() -> int:
    """Worker cap from ISACGUARD_THREADS (default 1, i.e. serial)."""
    raw = os.environ.get("ISACGUARD_THREADS", "").strip()
    if not raw:
        return 1
    n = int(raw)
    if n < 1:
        raise RuntimeError("ISACGUARD_THREADS must be >= 1")
    return n


def mf_scan(y: np.ndarray, steer_conj: np.ndarray, backend: str | None = None):
    """Matched-filter scan of snapshots ``y`` (trials, N) against a grid.

    ``steer_conj`` holds the conjugated steering vectors, one grid point per
    row.  Returns ``(idx, p_left, p_center, p_right)``; ties resolve to the
    lowest grid index.  Edge peaks repeat the center power in the missing
    neighbour slot.
    """
    y = np.ascontiguousarray(y, dtype=np.complex128)
    steer_conj = np.ascontiguousarray(steer_conj, dtype=np.complex128)
    if y.ndim != 2 or steer_conj.ndim != 2:
        raise ValueError("mf_scan expects 2-D snapshot and steering arrays")
    if steer_conj.shape[0] == 0:
        raise ValueError("empty angle grid")
    if backend is None:
        backend = active_backend()
    if backend == "cy":
        return _compiled.mf_scan(y, steer_conj)
    if backend == "py":
        return _mf_scan_numpy(y, steer_conj)
    raise ValueError(f"unknown backend {backend!r}")


def _mf_scan_numpy(y: np.ndarray, steer_conj: np.ndarray):
    trials = y.shape[0]
    npts = steer_conj.shape[0]
    idx = np.empty(trials, dtype=np.int64)
    pl = np.empty(trials, dtype=np.float64)
    pc = np.empty(trials, dtype=np.float64)
    pr = np.empty(trials, dtype=np.float64)
    at = steer_conj.T
    for s in range(0, trials, _CHUNK):
        e = min(s + _CHUNK, trials)
        proj = y[s:e] @ at
        power = proj.real**2 + proj.imag**2
        best = np.argmax(power, axis=1)  # first maximum
        rows = np.arange(e - s)
        idx[s:e] = best
        pc[s:e] = power[rows, best]
        pl[s:e] = power[rows, np.maximum(best - 1, 0)]
        pr[s:e] = power[rows, np.minimum(best + 1, npts - 1)]
        left_edge = best == 0
        right_edge = best == npts - 1
        pl[s:e][left_edge] = pc[s:e][left_edge]
        pr[s:e][right_edge] = pc[s:e][right_edge]
    return idx, pl, pc, pr
