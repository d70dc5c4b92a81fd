"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``RDESTEADY_BACKEND=python`` to force the fallback.
"""
import os
import warnings

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels

_requested = os.environ.get("RDESTEADY_BACKEND", "").strip().lower()
if _requested and _requested not in _BACKENDS:
    warnings.warn(f"backend {_requested!r} unavailable, using default", RuntimeWarning)
    _requested = ""
_active = _BACKENDS[_requested or ("compiled" if _ckernels is not None else "python")]

ST_OK = _pykernels.ST_OK
ST_MAXITER = _pykernels.ST_MAXITER
ST_SINGULAR = _pykernels.ST_SINGULAR
ST_BLOWUP = _pykernels.ST_BLOWUP


def available():
    return sorted(_BACKENDS)


def get(name=None):
    """Return the kernel module ``name`` (default: the active one)."""
    if name is None:
        return _active
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {available()}") from None


def active_name():
    return _active.BACKEND


def set_backend(name):
    """Switch the process-wide default backend; returns the previous name."""
    global _active
    prev = _active.BACKEND
    _active = get(name)
    return prev
