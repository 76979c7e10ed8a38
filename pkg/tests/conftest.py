import numpy as np
import pytest

from hofa.funcspace import DomainSpec, SampledFunction


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_bounded(rng, N, kind="cyclic"):
    z = rng.normal(size=N) + 1j * rng.normal(size=N)
    z = z / np.maximum(1.0, np.abs(z)) * rng.uniform(0, 1, N)
    return SampledFunction(DomainSpec(kind, N), z)
