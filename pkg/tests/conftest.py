import numpy as np
import pytest
from hypothesis import settings

from macfb.channel import build_additive_mod_m, build_product, bsc
from macfb.reference import parallel_bscs

settings.register_profile("macfb", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("macfb")


@pytest.fixture(scope="session")
def ternary():
    return build_additive_mod_m(3, 0.1)


@pytest.fixture(scope="session")
def parallel():
    return parallel_bscs()


def random_rows(rng, shape, y, floor=0.0):
    q = rng.dirichlet(np.ones(y), size=shape) + floor
    return q / q.sum(-1, keepdims=True)
