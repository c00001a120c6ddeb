import pytest

from relevation_lab.dist_core import Exponential, Gamma, LaiXieNonMonotone, StoyanovNBU, Weibull
from relevation_lab.relevation import DistributionSequence


@pytest.fixture
def exp1():
    return Exponential(rate=1.0)


@pytest.fixture
def gamma2():
    return Gamma(shape=2.0, scale=1.0)


@pytest.fixture
def gamma_half():
    return Gamma(shape=0.5, scale=1.0)


@pytest.fixture
def weibull2():
    return Weibull(shape=2.0, scale=1.0)


@pytest.fixture
def stoyanov():
    return StoyanovNBU()


@pytest.fixture
def laixie():
    return LaiXieNonMonotone()


@pytest.fixture
def iid():
    """Sequence with a single repeated law."""

    def make(law):
        return DistributionSequence(entries=[law])

    return make


@pytest.fixture
def families(exp1, gamma2, gamma_half, weibull2, stoyanov, laixie):
    return [exp1, gamma2, gamma_half, weibull2, stoyanov, laixie]
