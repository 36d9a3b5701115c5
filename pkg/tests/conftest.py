import numpy as np
import pytest

from rkhs_fusion.agent import AgentSpace
from rkhs_fusion.domain import Domain
from rkhs_fusion.fusion import build_fusion_space
from rkhs_fusion.rkhs import AnchorSet, FeatureKernel, constant, exponential, monomial
from rkhs_fusion.runtime import assemble_system

POLY_ANCHORS = (0.0, 2.0, 4.0, -2.0, -4.0)
EXP_ANCHORS = (1.0, 3.0, 5.0, -1.0, -3.0)


def make_agents():
    k1 = FeatureKernel([constant(), monomial(1), monomial(2)])
    k2 = FeatureKernel([exponential(-1), exponential(1)])
    a1 = AgentSpace(1, k1, AnchorSet(POLY_ANCHORS, "H1"), Domain(((-5.0, 5.0),)))
    a2 = AgentSpace(2, k2, AnchorSet(EXP_ANCHORS, "H2"), Domain(((-10.0, -5.0), (5.0, 10.0))))
    return a1, a2


@pytest.fixture
def agents():
    return make_agents()


@pytest.fixture
def space(agents):
    return build_fusion_space(*agents)


@pytest.fixture
def scaled_space(agents):
    return build_fusion_space(*agents, gram_normalization="gram")


@pytest.fixture
def system(scaled_space):
    return assemble_system(scaled_space)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


PRIMITIVES = ("constant", "monomial(1)", "monomial(2)", "monomial(3)", "exp(-1)", "exp(+1)")


def random_space(rng, gram_normalization="none"):
    """Two agents with random primitive feature sets on overlapping domains."""
    from rkhs_fusion.rkhs import SumKernel, fusion_dimension, parse_feature, select_anchors
    kernels = []
    for _ in range(2):
        names = rng.choice(PRIMITIVES, size=rng.integers(1, 4), replace=False)
        kernels.append(FeatureKernel([parse_feature(n) for n in names]))
    domains = (Domain(((-2.0, 1.0),)), Domain(((-1.0, 2.0),)))
    m = fusion_dimension(kernels[0], kernels[1], np.linspace(-2, 2, 256))
    total = SumKernel(*kernels)
    spaces = []
    for idx, (k, d) in enumerate(zip(kernels, domains), 1):
        anchors = select_anchors(total, d.grid(31) + 0.01 * idx, m, f"H{idx}")
        spaces.append(AgentSpace(idx, k, anchors, d))
    return build_fusion_space(*spaces, gram_normalization=gram_normalization)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance
    if test_acceptance.VERDICTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(test_acceptance.VERDICTS):
            terminalreporter.write_line(test_acceptance.VERDICTS[key])
