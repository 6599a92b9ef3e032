"""Compute-backend selection.

The compiled extension (``percdrift._ckern``) implements the hot kernels;
``percdrift._pykern`` is the pure-Python fallback with identical
semantics. Selection happens at import: the extension is used when it
built successfully, unless ``PERCDRIFT_BACKEND`` forces a choice
("compiled" or "python"). ``benchmarks/bench_kernels.py`` compares the
two.
"""

from __future__ import annotations

import os

from . import _pykern

_FORCE = os.environ.get("PERCDRIFT_BACKEND", "").strip().lower()

_ckern = None
if _FORCE != "python":
    try:
        from . import _ckern  # type: ignore[attr-defined]
    except ImportError:
        _ckern = None
        if _FORCE == "compiled":
            raise ImportError(
                "PERCDRIFT_BACKEND=compiled but the extension is not built; "
                "run `pip install -e . --no-build-isolation`"
            )

_impl = _ckern if _ckern is not None else _pykern

BACKEND_NAME = _impl.BACKEND_NAME

FINITE = _impl.FINITE
ESCAPED = _impl.ESCAPED
CENSORED = _impl.CENSORED
FACE_PLUS = _impl.FACE_PLUS
FACE_MINUS = _impl.FACE_MINUS
FACE_SIDE = _impl.FACE_SIDE
FACE_CENSORED = _impl.FACE_CENSORED


def make_kernel_env(d, p, seed, direction, lam, frame, overlay_packed):
    return _impl.KernelEnv(d, p, seed, direction, lam, frame, overlay_packed)


def backend_name() -> str:
    return BACKEND_NAME


def python_kernel_env(d, p, seed, direction, lam, frame, overlay_packed):
    """Always the pure-Python backend (for parity tests and benchmarks)."""
    return _pykern.KernelEnv(d, p, seed, direction, lam, frame, overlay_packed)


def compiled_kernel_env(d, p, seed, direction, lam, frame, overlay_packed):
    """The compiled backend, or None when it is not available."""
    if _ckern is None:
        return None
    return _ckern.KernelEnv(d, p, seed, direction, lam, frame, overlay_packed)
