"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; the pure-Python
twin is a drop-in replacement (bit-identical trajectories). Set
``LATTICE_GIBBS_PURE=1`` to force the pure backend, e.g. for benchmarking.
"""

import os

from . import _pykernels as pure
from .streams import UniformStream, as_stream

try:
    from . import _ckernels as compiled
except ImportError:
    compiled = None

if compiled is not None and os.environ.get("LATTICE_GIBBS_PURE", "") != "1":
    active = compiled
else:
    active = pure

BACKEND = active.BACKEND_NAME

__all__ = ["active", "pure", "compiled", "BACKEND", "UniformStream", "as_stream"]
