import pytest

from pgfv.mesh import build_structured_mesh


@pytest.fixture(scope="session")
def mesh4():
    return build_structured_mesh(4)


@pytest.fixture(scope="session")
def mesh8():
    return build_structured_mesh(8)


@pytest.fixture(scope="session")
def mesh8_perturbed():
    return build_structured_mesh(8, 0.2, seed=42)
