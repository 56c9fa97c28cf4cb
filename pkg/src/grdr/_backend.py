"""Kernel selection: compiled extension when importable, numpy fallback otherwise.

Set ``GRDR_BACKEND=python`` to force the fallback.
"""

import logging
import os

from . import _fallback

logger = logging.getLogger(__name__)

try:
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None

HAVE_EXTENSION = _compiled is not None


def available():
    return ["cython", "python"] if HAVE_EXTENSION else ["python"]


def default_backend():
    choice = os.environ.get("GRDR_BACKEND", "auto").lower()
    if choice == "python":
        return "python"
    if choice == "cython" and not HAVE_EXTENSION:
        raise ImportError("GRDR_BACKEND=cython but the compiled extension is not built")
    return "cython" if HAVE_EXTENSION else "python"


def get_run_chains(backend=None):
    backend = backend or default_backend()
    if backend == "cython":
        if not HAVE_EXTENSION:
            raise ImportError("compiled extension grdr._kernels is not available")
        return _compiled.run_chains
    if backend == "python":
        return _fallback.run_chains
    raise ValueError(f"unknown backend {backend!r}")
