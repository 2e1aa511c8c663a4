"""Walk-kernel backend selection.

The compiled Cython kernel is preferred; the pure-Python reference kernel is
the fallback. Both consume the same splitmix64 stream and return identical
batches for a given seed. Set AGX_PURE_PYTHON=1 to force the fallback.
"""

from __future__ import annotations

import os

from . import _walk_py

if os.environ.get("AGX_PURE_PYTHON") == "1":
    _impl = _walk_py
    BACKEND = "python"
else:
    try:
        from . import _walk_c as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = _walk_py
        BACKEND = "python"

walk_batch = _impl.walk_batch
rng_next = _impl.rng_next

MASK64 = _walk_py.MASK64

_BACKENDS = {"python": _walk_py}
if BACKEND == "compiled":
    _BACKENDS["compiled"] = _impl


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def get_backend(name: str):
    """Return the kernel module for `name` ("python" or "compiled")."""
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} not available (have {available_backends()})") from None
