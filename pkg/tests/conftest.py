import os

# pin BLAS threading before numpy loads anywhere; the desk-scale acceptance
# runtime bound is a single-threaded claim
for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")

import pytest

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
MNIST_DIR = os.path.join(REPO_ROOT, "data", "mnist")


@pytest.fixture(scope="session")
def mnist_dir() -> str:
    if not os.path.isdir(MNIST_DIR):
        pytest.skip("bundled MNIST files missing")
    return MNIST_DIR
