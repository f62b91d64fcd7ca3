import pytest

from entnetsim import ItuChannel, build_plan


@pytest.fixture(scope="session")
def reference_plan():
    """The reference 5-subnet, 8-user-per-subnet allocation around C40."""
    return build_plan(5, 8, ItuChannel(40))
