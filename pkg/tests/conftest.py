import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from linespec2d.signal_model import Frequency2D, SampleSet, SpectralSignal

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_signal(rng, n, r, on_grid=False, distinct_grid=True):
    if on_grid:
        cells = rng.choice(n * n, size=r, replace=not distinct_grid)
        freqs = [Frequency2D(c // n / n, c % n / n) for c in cells]
    else:
        freqs = [Frequency2D(*rng.random(2)) for _ in range(r)]
    amps = (0.5 + rng.random(r)) * np.exp(2j * np.pi * rng.random(r))
    return SpectralSignal(n, tuple(zip(freqs, amps)))


def random_samples(rng, n, m):
    return SampleSet.from_flat(n, np.sort(rng.choice(n * n, size=m, replace=False)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
