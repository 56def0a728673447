"""Joint adaptive beamforming and subspace pursuit receivers for SDMA
grant-free NOMA uplinks, plus a link-level Monte Carlo simulator."""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
