import math

import pytest

from movingclt.model import SequenceModel, VarianceRule

E_ABS_Z3 = 2.0 * math.sqrt(2.0 / math.pi)


@pytest.fixture
def iid_normal():
    return SequenceModel.independent("normal")


@pytest.fixture
def iid_rademacher():
    return SequenceModel.independent("rademacher")


@pytest.fixture
def linear_var():
    return SequenceModel.independent("normal", VarianceRule("linear", 1.0))


@pytest.fixture
def geometric4():
    return SequenceModel.independent("rademacher", VarianceRule("geometric", 1.0, 4.0))


@pytest.fixture
def ar1():
    return SequenceModel.gaussian_ar1(0.5)


@pytest.fixture
def ma1():
    return SequenceModel.moving_average([1.0, 0.5])
