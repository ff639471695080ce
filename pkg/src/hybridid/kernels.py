"""Backend selection for the polynomial kernels.

The compiled extension is used when it imports; setting the environment
variable ``HYBRIDID_PURE_PYTHON=1`` (or calling :func:`use`) forces the
numpy fallback. Callers must go through attribute access on this module
(``kernels.conv_nd(...)``) so that switching backends takes effect.
"""
import os

from hybridid import _pykernels

try:
    from hybridid import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_NAMES = ("conv_nd", "horner", "shift_axis", "refine_root")
BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["compiled"] = _ckernels

backend = None


def use(name):
    """Switch the active backend (``"compiled"`` or ``"python"``)."""
    global backend
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}")
    mod = BACKENDS[name]
    g = globals()
    for fn in _NAMES:
        g[fn] = getattr(mod, fn)
    backend = name


def available():
    return sorted(BACKENDS)


use("python" if os.environ.get("HYBRIDID_PURE_PYTHON") or _ckernels is None else "compiled")
