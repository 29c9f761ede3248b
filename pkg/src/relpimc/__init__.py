"""Relativistic path-integral Monte Carlo for a particle in a harmonic well.

The sampling hot loop lives in a compiled extension (``relpimc._core``) with
a pure-Python fallback (``relpimc._pycore``); ``relpimc.BACKEND`` names the
one in use.
"""

__version__ = "0.1.0"

from ._backend import BACKEND  # noqa: E402

__all__ = ["BACKEND", "__version__"]
