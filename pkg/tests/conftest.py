import numpy as np
import pytest

from gssc.synthetic import generate_dataset


@pytest.fixture(scope="session")
def clean_ds60():
    """Clean, well-separated three-subspace dataset (fixed seed)."""
    return generate_dataset(60.0, seed=101)


@pytest.fixture(scope="session")
def corrupted_ds60():
    """Errors + erasures + noise at the benchmark operating point."""
    return generate_dataset(60.0, p_err=0.05, p_ers=0.15, snr_db=20.0, seed=202)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
