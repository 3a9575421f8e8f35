"""Backend selection for the hot loops.

The compiled core is used when importable; ``OILWATER_PURE=1`` forces the
pure-Python fallback. Both expose ``simulate`` and ``lazy_walk`` with
identical results.
"""

import os

from . import _pycore

pure = _pycore

if os.environ.get("OILWATER_PURE", "") not in ("", "0"):
    compiled = None
else:
    try:
        from . import _core as compiled
    except ImportError:
        compiled = None

backend = compiled if compiled is not None else pure
BACKEND = backend.NAME

simulate = backend.simulate
lazy_walk = backend.lazy_walk
