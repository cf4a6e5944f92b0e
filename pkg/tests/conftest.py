import math

import pytest

from tte_stability import TteStudy
from tte_stability.context import StudyContext
from tte_stability.models import ORIGINAL, SearchConfig, SmibParams
from tte_stability.smib import smib_network


@pytest.fixture
def ctx():
    return StudyContext()


@pytest.fixture(scope="session")
def study():
    return TteStudy()


@pytest.fixture(scope="session")
def case(study):
    return study.mm.network.load_case()


@pytest.fixture(scope="session")
def specs(study):
    return study.mm.network.load_contingencies()


@pytest.fixture(scope="session")
def cont1(study, case):
    return study.mm.network.build_contingency(case, 4, (4, 6), contingency_id=1)


@pytest.fixture(scope="session")
def cont7(study, case):
    return study.mm.network.build_contingency(case, 7, (5, 7), contingency_id=7)


@pytest.fixture(scope="session")
def smib_params():
    return SmibParams(delta_s=math.pi / 6, alpha=0.1, beta=10.0)


@pytest.fixture(scope="session")
def smib_original(study, smib_params):
    net = smib_network(smib_params)
    return study.mm.sim.build_tte_system(net, [smib_params.delta_s], ORIGINAL)


@pytest.fixture
def quick_search():
    return SearchConfig(dt=0.01, horizon=10.0)
