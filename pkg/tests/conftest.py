import numpy as np
import pytest

from rs_subspace_repair.gfield import make_field_ctx


@pytest.fixture
def gf4():
    return make_field_ctx(2, 1, 2)


@pytest.fixture
def gf8():
    return make_field_ctx(2, 1, 3)


@pytest.fixture
def gf16():
    return make_field_ctx(2, 1, 4)


@pytest.fixture
def gf32():
    return make_field_ctx(2, 1, 5)


@pytest.fixture
def gf64():
    return make_field_ctx(2, 1, 6)


@pytest.fixture
def gf81():
    return make_field_ctx(3, 1, 4)


@pytest.fixture
def gf256():
    return make_field_ctx(2, 1, 8)


@pytest.fixture
def gf16_over_gf4():
    # q = 4, m = 2
    return make_field_ctx(2, 2, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
