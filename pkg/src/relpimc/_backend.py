"""Select the sampling core at import time.

The compiled ``_core`` extension is preferred. Set ``RELPIMC_BACKEND=python``
to force the pure-Python fallback, or ``RELPIMC_BACKEND=cython`` to make a
missing extension an import error instead of a silent fallback.
"""

import os

_choice = os.environ.get("RELPIMC_BACKEND", "auto").lower()

if _choice == "python":
    from . import _pycore as core
elif _choice == "cython":
    from . import _core as core
else:
    try:
        from . import _core as core
    except ImportError:
        from . import _pycore as core

BACKEND = core.BACKEND


def get_core(name=None):
    """Return the core module called ``name`` ('cython' or 'python'), or the active one."""
    if name is None:
        return core
    if name == "python":
        from . import _pycore
        return _pycore
    if name == "cython":
        from . import _core
        return _core
    raise ValueError(f"unknown backend {name!r}")
