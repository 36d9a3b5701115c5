import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from rkhs_fusion.agent import AgentState, DataPoint, local_cost, local_estimate
from rkhs_fusion.fusion import (build_download_operator, build_fusion_space, download,
                                reconstruct_data, ridge_coefficients, upload)
from rkhs_fusion.rkhs import FeatureKernel, SumKernel, constant, exponential, monomial

from .conftest import make_agents

AGENTS = make_agents()
SPACE = build_fusion_space(*AGENTS)
finite = st.floats(-3, 3, allow_nan=False)
coords3 = st.lists(finite, min_size=3, max_size=3)
coords2 = st.lists(finite, min_size=2, max_size=2)
log_rho = st.floats(-3, 6)


class TestProperties:
    @given(st.floats(-10, 10), st.floats(-10, 10))
    def test_kernel_symmetric(self, x, y):
        k = SumKernel(FeatureKernel([constant(), monomial(1), monomial(2)]),
                      FeatureKernel([exponential(-1), exponential(1)]))
        assert k(x, y) == k(y, x)

    @given(coords3, st.floats(-5, 5), finite, log_rho)
    @settings(max_examples=50, deadline=None)
    def test_estimate_not_worse_than_prior(self, c, x, y, lr):
        a = AGENTS[0]
        prior = a.from_feature_coordinates(c)
        d = DataPoint(x, y)
        rho = 10.0 ** lr
        out = local_estimate(AgentState(a, prior), d, rho)
        new = local_cost(a, out.coefficients, d, rho, prior.coefficients)
        old = local_cost(a, prior.coefficients, d, rho, prior.coefficients)
        assert new <= old * (1 + 1e-9) + 1e-12

    @given(coords2, log_rho)
    @settings(max_examples=50, deadline=None)
    def test_reconstruction_round_trip(self, c, lr):
        a = AGENTS[1]
        f = a.from_feature_coordinates(c)
        rho = 10.0 ** lr
        space = SPACE
        d = reconstruct_data(space, 2, f, rho)
        alpha = ridge_coefficients(a.gram, d.outputs, rho)
        np.testing.assert_allclose(a.gram @ alpha, a.gram @ f.coefficients,
                                   atol=1e-8 * max(1.0, np.abs(a.gram @ f.coefficients).max()))

    @given(coords3)
    @settings(max_examples=30, deadline=None)
    def test_download_isometric_on_own_space(self, c):
        space = SPACE
        a = AGENTS[0]
        f = a.from_feature_coordinates(c)
        back = download(build_download_operator(space, 1), upload(space, 1, f))
        assert abs(a.norm(back) - a.norm(f)) <= 1e-8 * max(1.0, a.norm(f))
