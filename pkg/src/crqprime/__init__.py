"""CR invariants of strictly pseudoconvex boundaries in C^2.

Jets of Fefferman's defining function, the obstruction function, the
Q-prime curvature and its boundary integral, with numerical checks of the
variational and renormalization identities.
"""

import os

# TBB shipped with the base image is too old for numba; the workqueue layer
# is deterministic and always available.
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CRQError,
    GeometryError,
    NumericError,
    ParseError,
)

__all__ = ["CRQError", "GeometryError", "NumericError", "ParseError", "__version__"]
