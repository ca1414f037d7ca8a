"""KF replay kernel with a compiled fast path.

Imports the Cython extension when the build produced one, otherwise falls
back to the numpy implementation.  `BACKEND` reports which one is active;
both expose the same `kf_run` contract.
"""

try:
    from ._ckernel import BACKEND, kf_run
except ImportError:  # extension not built
    from ._pykernel import BACKEND, kf_run

from . import _pykernel

__all__ = ["kf_run", "BACKEND", "_pykernel"]
