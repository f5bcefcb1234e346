"""Backend selection for the hot loops.

The compiled extension is used when it was built; otherwise, or when
``SELFSUP_BACKEND=python`` is set, the numpy fallback is used.
"""

import os

from . import _fallback

python = _fallback

try:
    from . import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

if compiled is not None and os.environ.get("SELFSUP_BACKEND", "").lower() != "python":
    backend, BACKEND = compiled, "cython"
else:
    backend, BACKEND = _fallback, "python"

disk_median = backend.disk_median
nl_means = backend.nl_means
