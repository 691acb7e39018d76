"""Dipole-to-nanotip coupling efficiency with a 3D FDTD solver and exact fiber modes."""

import os

# The bundled TBB is too old for numba; probe OpenMP first to skip its warning.
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

__version__ = "0.1.0"
