import pytest

from minegames import GameParams


@pytest.fixture
def imm():
    def make(p=0.3, d=10):
        return GameParams("immediate", p, d)

    return make


@pytest.fixture
def strat():
    def make(p=0.25, d=10, a_max=None):
        return GameParams("strategic", p, d, a_max)

    return make
