"""Sequence-model DP kernels: compiled extension with a pure-numpy fallback.

The compiled module is preferred when importable; set ``DSQA_PURE_PYTHON=1``
to force the fallback. Both expose the same functions and agree numerically
(tested side by side when both are present).
"""

from __future__ import annotations

import os

from dsqa._kernels import pydp

if os.environ.get("DSQA_PURE_PYTHON"):
    _backend = pydp
else:
    try:
        from dsqa._kernels import crfdp as _backend  # type: ignore[no-redef]
    except ImportError:
        _backend = pydp

IMPLEMENTATION: str = _backend.IMPLEMENTATION
log_partition = _backend.log_partition
forward_backward = _backend.forward_backward
viterbi_path = _backend.viterbi_path


def available_backends() -> dict[str, object]:
    """Importable kernel modules keyed by implementation name."""
    backends: dict[str, object] = {pydp.IMPLEMENTATION: pydp}
    try:
        from dsqa._kernels import crfdp

        backends[crfdp.IMPLEMENTATION] = crfdp
    except ImportError:
        pass
    return backends
