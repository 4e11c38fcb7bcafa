from importlib import resources

import pytest

from taucover.covering import load_grading
from taucover.quiver import load_algebra


def data_file(name: str) -> str:
    return str(resources.files("taucover") / "data" / name)


@pytest.fixture(scope="session")
def example():
    return load_algebra(data_file("example.quiver"))


@pytest.fixture(scope="session")
def a2():
    return load_algebra(data_file("a2.quiver"))


@pytest.fixture(scope="session")
def dual():
    return load_algebra(data_file("dual.quiver"))


@pytest.fixture(scope="session")
def kronecker():
    return load_algebra(data_file("kronecker.quiver"))


@pytest.fixture(scope="session")
def example_z(example):
    return load_grading(data_file("example_z.grading"), example)


@pytest.fixture(scope="session")
def example_free(example):
    return load_grading(data_file("example_free.grading"), example)


@pytest.fixture(scope="session")
def dual_line(dual):
    return load_grading(data_file("dual_line.grading"), dual)


@pytest.fixture(scope="session")
def a2_line(a2):
    return load_grading(data_file("a2_line.grading"), a2)
