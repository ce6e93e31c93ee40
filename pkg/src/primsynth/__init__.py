"""Procedural primitive-scene synthesizer with a deterministic CPU renderer."""

import os

# the bundled TBB is too old for numba; skip straight to OpenMP
os.environ.setdefault("NUMBA_THREADING_LAYER_PRIORITY", "omp workqueue tbb")

__version__ = "0.1.0"
