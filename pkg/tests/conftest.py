import os
import sys

# the per-slot linear algebra is tiny; threaded BLAS only adds contention,
# especially under the trial process pool
for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")

sys.path.insert(0, os.path.dirname(__file__))
