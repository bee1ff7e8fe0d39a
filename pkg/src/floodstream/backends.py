"""Backend selection for the per-pixel kernels.

The compiled accelerator is preferred when importable; the NumPy fallback
is always available.  Set ``FLOODSTREAM_BACKEND`` to ``numpy`` or
``cython`` to force one (forcing ``cython`` raises if the extension is
missing rather than silently falling back).
"""

from __future__ import annotations

import os

from . import _kernels_np

try:
    from . import _accel  # type: ignore[attr-defined]
except ImportError:  # pragma: no cover - build-environment dependent
    _accel = None


def select_backend(name: str | None = None):
    """Return the kernel module for ``name`` (default: env var, then auto)."""
    if name is None:
        name = os.environ.get("FLOODSTREAM_BACKEND", "auto")
    if name == "numpy":
        return _kernels_np
    if name == "cython":
        if _accel is None:
            raise RuntimeError(
                "compiled accelerator requested but not built; "
                "reinstall with a working C toolchain or use numpy"
            )
        return _accel
    if name == "auto":
        return _accel if _accel is not None else _kernels_np
    raise ValueError(f"unknown backend {name!r}")


kernels = select_backend()


def available_backends() -> dict:
    """Importable kernel backends, keyed by name."""
    backends = {"numpy": _kernels_np}
    if _accel is not None:
        backends["cython"] = _accel
    return backends
