"""Dual estimation of serial-chain motion and kinematic offsets from IMUs.

The package couples a real-time extended Kalman filter over joint states
with maximum-a-posteriori estimation of per-link offset corrections, and
distributes the expensive parameter estimation across a chain of compute
nodes that refine the result on growing data prefixes.
"""

from .core import BACKEND as core_backend

__version__ = "0.1.0"

__all__ = ["core_backend", "__version__"]
