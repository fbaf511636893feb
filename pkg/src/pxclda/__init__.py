"""Real-space Kohn-Sham QEDFT with the photon-free pxLDA/pxcLDA potential."""
from ._backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
