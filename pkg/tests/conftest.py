import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hawkeslob import HawkesParams, default_params


@pytest.fixture(scope="session")
def params10() -> HawkesParams:
    return default_params()


@pytest.fixture(scope="session")
def params4() -> HawkesParams:
    """4-type analogue of the default set (reduced-scale calibration mode)."""
    mu = np.array([0.01, 0.01, 0.02, 0.02])
    return HawkesParams(mu=mu, alpha=np.tile(mu[:, None], (1, 4)), beta=np.full((4, 4), 0.2))


def random_instance(seed: int, m_max: int = 4, n_max: int = 100):
    """Small random parameter set plus event history for oracle comparisons."""
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, m_max + 1))
    n = int(rng.integers(2, n_max + 1))
    horizon = float(rng.uniform(20.0, 100.0))
    times = np.sort(rng.uniform(0.01, horizon, n))
    while np.any(np.diff(times) <= 0):  # ties are measure-zero but guard anyway
        times = np.sort(rng.uniform(0.01, horizon, n))
    types = rng.integers(1, m + 1, n)
    params = HawkesParams(
        mu=rng.uniform(0.05, 0.5, m),
        alpha=rng.uniform(0.0, 0.6, (m, m)),
        beta=rng.uniform(0.4, 3.0, (m, m)),
    )
    return params, times, types, horizon
