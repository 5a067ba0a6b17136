import pytest

from prekahler.coframe import adapted_coframe
from prekahler.dsl import builtin_potential

ORIGIN = {"z1": 0j, "z2": 0j}


@pytest.fixture(scope="session")
def flat_pair():
    return builtin_potential("flat", {})


@pytest.fixture(scope="session")
def homog3_pair():
    return builtin_potential("homog", {"a": 3.0})


@pytest.fixture(scope="session")
def kahler_pair():
    return builtin_potential("kahler", {})


@pytest.fixture(scope="session")
def product_pair():
    return builtin_potential("product", {})


@pytest.fixture(scope="session")
def cf_flat(flat_pair):
    return adapted_coframe(flat_pair[0])


@pytest.fixture(scope="session")
def cf_homog3(homog3_pair):
    return adapted_coframe(homog3_pair[0])
