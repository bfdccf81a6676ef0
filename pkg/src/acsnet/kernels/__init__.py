"""Kernel backend selection: compiled Cython core with numpy fallback.

The compiled module is preferred when importable; set ACSNET_BACKEND to
"pure" or "compiled" to force a choice (forcing "compiled" raises if the
extension is missing). Streaming/batch bit-equality is guaranteed within
a backend, and the two backends agree to float64 rounding.
"""

from __future__ import annotations

import os

from . import pure

_BACKENDS = {"pure": pure}
try:
    from . import _core  # type: ignore[attr-defined]

    _BACKENDS["compiled"] = _core
except ImportError:
    _core = None

_env = os.environ.get("ACSNET_BACKEND", "auto")
if _env == "auto":
    _active_name = "compiled" if "compiled" in _BACKENDS else "pure"
elif _env in _BACKENDS:
    _active_name = _env
elif _env == "compiled":
    raise ImportError("ACSNET_BACKEND=compiled but acsnet.kernels._core "
                      "is not built; reinstall with a C compiler")
else:
    raise ImportError(f"unknown ACSNET_BACKEND={_env!r}")

_active = _BACKENDS[_active_name]


def active():
    """The module providing the kernel functions."""
    return _active


def backend_name() -> str:
    return _active_name


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def use_backend(name: str) -> str:
    """Switch backends (tests and benchmarks); returns the previous name."""
    global _active, _active_name
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available "
                         f"(have {available_backends()})")
    prev = _active_name
    _active_name = name
    _active = _BACKENDS[name]
    return prev
