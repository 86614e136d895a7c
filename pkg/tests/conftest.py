import pytest

from fockcert.fock import ExperimentParams, SqueezeParam


def make_params(lambda2, zeta1=1.0, zeta2=1.0, m=0):
    return ExperimentParams(SqueezeParam.from_lambda2(lambda2), zeta1, zeta2, m)


@pytest.fixture
def params():
    return make_params
