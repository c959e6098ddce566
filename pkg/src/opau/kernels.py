"""Backend selection for the activation kernels.

The compiled extension is used when it imports cleanly; otherwise (or when
``OPAU_PURE=1`` is set in the environment) the numpy implementation is used.
Both backends are importable explicitly for testing and benchmarking.
"""
import os

from . import _kernels_py as pure

try:
    from . import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

if compiled is not None and os.environ.get("OPAU_PURE", "") in ("", "0"):
    backend = compiled
    BACKEND = "compiled"
else:
    backend = pure
    BACKEND = "pure"

MONO = pure.MONO


def available_backends():
    out = {"pure": pure}
    if compiled is not None:
        out["compiled"] = compiled
    return out
