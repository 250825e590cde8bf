"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when importable; otherwise the
numpy fallback. ``CROWDREP_BACKEND=python|cython`` forces a choice.
"""

import importlib
import os

AVAILABLE = {}
for _name, _mod in (("cython", "._ckernels"), ("python", "._pykernels")):
    try:
        AVAILABLE[_name] = importlib.import_module(_mod, __package__)
    except ImportError:
        pass


def get_kernels(name=None):
    name = name or os.environ.get("CROWDREP_BACKEND", "auto")
    if name == "auto":
        return AVAILABLE.get("cython") or AVAILABLE["python"]
    if name not in AVAILABLE:
        raise ImportError(f"kernel backend {name!r} is not available (have: {sorted(AVAILABLE)})")
    return AVAILABLE[name]


kernels = get_kernels()
BACKEND = kernels.NAME
