import pytest

from citysim.oracle import Oracle
from citysim.persona import generate_population
from citysim.world import generate_city


@pytest.fixture(scope="session")
def city():
    return generate_city(4, 4, 12, seed=5)


@pytest.fixture(scope="session")
def small_city():
    return generate_city(2, 2, 8, seed=3)


@pytest.fixture(scope="session")
def personas(city):
    return generate_population(30, city, seed=7)


@pytest.fixture()
def stub_oracle():
    return Oracle.stub(seed=7)


class FailingBackend:
    """Backend that always raises; exercises every declared fallback."""

    name = "failing"

    def handle(self, request):
        from citysim.oracle import OracleTransportError

        raise OracleTransportError("backend down")


@pytest.fixture()
def failing_oracle():
    return Oracle(FailingBackend(), cache=False, seed=0)
