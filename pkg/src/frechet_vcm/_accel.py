"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the pure-Python
version is used.  Setting ``FRECHET_VCM_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import os

from . import _pava_py

_compiled = None
if os.environ.get("FRECHET_VCM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _pava as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"
COMPILED_AVAILABLE = _compiled is not None

pava_rows = _compiled.pava_rows if _compiled is not None else _pava_py.pava_rows
pava_rows_python = _pava_py.pava_rows
pava_rows_compiled = _compiled.pava_rows if _compiled is not None else None
