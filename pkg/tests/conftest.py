import os
import sys
from pathlib import Path

# Single-threaded BLAS: the suite mixes many small solves with occasional
# large factorizations, and spinning BLAS worker threads slow the small
# ops by orders of magnitude on the 2-core CI boxes.
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lagnav.config import default_config
from lagnav.synthdata import make_dataset


@pytest.fixture(scope="session")
def bench_config():
    """The standard benchmark configuration (20% burst outliers)."""
    return default_config()


@pytest.fixture(scope="session")
def bench_dataset(bench_config):
    return make_dataset(bench_config.scenario_config())


@pytest.fixture(scope="session")
def clean_config(bench_config):
    """Outlier-free variant of the standard benchmark at 95% gate confidence."""
    import dataclasses

    return dataclasses.replace(bench_config, outlier_rate=0.0, chi2_p=0.95)


@pytest.fixture(scope="session")
def clean_dataset(clean_config):
    return make_dataset(clean_config.scenario_config())
