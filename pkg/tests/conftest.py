import pytest

from qszego.heisenberg import GroupDims
from qszego.kernel import build_kernel


@pytest.fixture(scope="session")
def dims():
    return GroupDims(2)


@pytest.fixture(scope="session")
def ker(dims):
    return build_kernel(dims, 1.0)
