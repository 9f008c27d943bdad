"""Pick the compiled kernels when importable, else the NumPy fallback.

Set ``PSRANK_BACKEND=python`` to force the fallback.
"""

import os

from . import _pyloop

python = _pyloop

try:
    from . import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

if compiled is not None and os.environ.get("PSRANK_BACKEND", "").lower() != "python":
    default = compiled
    NAME = "compiled"
else:
    default = _pyloop
    NAME = "python"


def get(name: str | None = None):
    """Return the kernel module by name: ``"compiled"``, ``"python"`` or default."""
    if name is None:
        return default
    if name == "python":
        return _pyloop
    if name == "compiled":
        if compiled is None:
            raise RuntimeError("compiled kernels are not built; run `pip install -e .`")
        return compiled
    raise ValueError(f"unknown backend {name!r}")
