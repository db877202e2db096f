import os

# Small-matrix training is faster without BLAS threading; must be set before
# numpy is first imported.
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")
