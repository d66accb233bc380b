"""Selection between the compiled kernel core and the numpy fallback.

The compiled extension (``segsolve._core``) is used when it imports; the
numpy implementation (``segsolve._core_py``) is the fallback.  Set
``SEGSOLVE_BACKEND=compiled`` to require the extension, ``=python`` to force
the fallback, anything else (or unset) means auto.  ``use()`` switches the
active implementation at runtime, which the benchmark and the equivalence
tests rely on.
"""

from __future__ import annotations

import os

from . import _core_py

_BACKENDS = ("auto", "compiled", "python")


def _load(name: str):
    if name == "python":
        return _core_py
    try:
        from . import _core
    except ImportError:
        if name == "compiled":
            raise RuntimeError(
                "SEGSOLVE_BACKEND=compiled but the segsolve._core extension "
                "is not built; reinstall with a C compiler available"
            ) from None
        return _core_py
    return _core


_requested = os.environ.get("SEGSOLVE_BACKEND", "auto").strip().lower() or "auto"
if _requested not in _BACKENDS:
    raise RuntimeError(
        f"invalid SEGSOLVE_BACKEND={_requested!r}; expected one of {_BACKENDS}"
    )
_impl = _load(_requested)


def use(name: str) -> str:
    """Switch the active backend ('auto', 'compiled' or 'python')."""
    global _impl
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; expected one of {_BACKENDS}")
    _impl = _load(name)
    return _impl.NAME


def active_backend() -> str:
    return _impl.NAME


def compiled_available() -> bool:
    try:
        from . import _core  # noqa: F401
    except ImportError:
        return False
    return True


def apply_integral(ext, istart, ishape, steps, weight):
    return _impl.apply_integral(ext, istart, ishape, steps, weight)


def apply_sup(ext, istart, ishape, steps):
    return _impl.apply_sup(ext, istart, ishape, steps)


def screened_matvec(x, c, h):
    return _impl.screened_matvec(x, c, h)


def thomas_spd(diag, off, rhs):
    return _impl.thomas_spd(diag, off, rhs)
