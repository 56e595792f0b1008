import numpy as np
import pytest

from flashcrash.synth import SyntheticSpec, generate


@pytest.fixture(scope="session")
def small_spec():
    return SyntheticSpec(seed=7, n_days=5, jump_rate=3.0)


@pytest.fixture(scope="session")
def small_ledger(small_spec):
    return generate(small_spec)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
