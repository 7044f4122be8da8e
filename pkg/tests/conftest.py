import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# jitted kernels compile on first use; keep hypothesis from timing that
settings.register_profile("adaptlep", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("adaptlep")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
