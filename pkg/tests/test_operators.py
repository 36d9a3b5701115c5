import numpy as np
import pytest

from rkhs_fusion.agent import AgentState, DataPoint, apply_learning_operator, embed_data
from rkhs_fusion.fusion import download, fuse, reconstruct_data
from rkhs_fusion.operators import (StageOperator, fixed_point_probe, fusion_operator_norm,
                                   multi_agent_operator_norm, norm_trace,
                                   projector_overlap_gap, schur_report, stage_operator)
from rkhs_fusion.runtime import Schedule


def random_psd(rng, n, rank=None):
    a = rng.standard_normal((n, rank or n))
    return a @ a.T


def stage_at(system, source_points, schedule):
    space = system.space

    def build(n):
        rho = schedule.value(n)
        x1, x2 = source_points[n - 1]
        return stage_operator(space, space.agent1, space.agent2, rho, rho, rho, x1, x2,
                              ops=system.ops)
    return build


class TestFusionNorm:
    def test_large_rho_bounded(self, scaled_space):
        assert fusion_operator_norm(scaled_space, 1e8).value ** 2 <= 1 + 1e-6

    def test_report_carries_gram_spectrum(self, scaled_space):
        out = fusion_operator_norm(scaled_space, 1.0)
        assert out.lambda_max_gram == pytest.approx(1.0, rel=1e-12)

    def test_schur_report_against_dense_eigensolve(self, rng):
        for _ in range(20):
            g = random_psd(rng, 8)
            rep = schur_report(g, 4)
            a, b, c = g[:4, :4], g[:4, 4:], g[4:, 4:]
            d = a - b @ np.linalg.inv(c) @ b.T
            assert rep.lambda_max_gram == pytest.approx(np.linalg.eigvalsh(g)[-1], rel=1e-10)
            assert rep.lambda_max_d == pytest.approx(
                max(np.linalg.eigvalsh(d)[-1], np.linalg.eigvalsh(c)[-1]), rel=1e-8)
            assert rep.block_bound == pytest.approx(
                max(np.linalg.eigvalsh(a)[-1], np.linalg.eigvalsh(c)[-1]), rel=1e-10)

    def test_top_eigenvalue_dominates_blocks(self, rng):
        # eigenvalue interlacing: a principal block never exceeds the whole
        for _ in range(20):
            rep = schur_report(random_psd(rng, 6), 3)
            assert rep.lambda_max_gram >= rep.block_bound - 1e-10

    def test_homogeneity(self, rng):
        g = random_psd(rng, 6)
        assert schur_report(2.5 * g, 3).lambda_max_gram == pytest.approx(
            2.5 * schur_report(g, 3).lambda_max_gram)


class TestMultiAgentNorm:
    def test_large_rho(self, agents):
        out = multi_agent_operator_norm(agents[0], agents[1], 1e8, 1e8)
        assert abs(out.value - 1) <= 2e-2

    def test_dominates_blocks(self, agents, space):
        out = multi_agent_operator_norm(agents[0], agents[1], 1.0, 10.0, space=space)
        assert out.value >= max(out.blocks)
        assert out.value == max(out.blocks)


class TestStageOperator:
    @pytest.fixture
    def stage(self, system):
        space = system.space
        return stage_operator(space, space.agent1, space.agent2, 3.0, 7.0, 5.0, 1.5, -6.0,
                              ops=system.ops)

    def test_zero_input(self, stage, agents):
        a1, a2 = agents
        out = stage.apply(a1.zero(), a2.zero(), a1.zero(), a2.zero())
        np.testing.assert_array_equal(out[0].coefficients, 0.0)
        np.testing.assert_array_equal(out[1].coefficients, 0.0)

    def test_matches_pipeline(self, stage, system, rng):
        space = system.space
        a1, a2 = space.agents
        for _ in range(50):
            f1 = a1.from_feature_coordinates(rng.standard_normal(3))
            f2 = a2.from_feature_coordinates(rng.standard_normal(2))
            p1 = embed_data(AgentState(a1), DataPoint(1.5, rng.standard_normal()))
            p2 = embed_data(AgentState(a2), DataPoint(-6.0, rng.standard_normal()))
            l1 = apply_learning_operator(AgentState(a1), f1, p1, 3.0)
            l2 = apply_learning_operator(AgentState(a2), f2, p2, 7.0)
            fused = fuse(space, reconstruct_data(space, 1, l1, 3.0),
                         reconstruct_data(space, 2, l2, 7.0), 5.0)
            expected = [download(op, fused, 1.0 / system.c_d) for op in system.ops]
            got = stage.apply(f1, f2, p1.function, p2.function)
            for g, e, a in zip(got, expected, (a1, a2)):
                ref = a.feature_coordinates(e)
                np.testing.assert_allclose(a.feature_coordinates(g), ref,
                                           atol=1e-8 * max(1.0, np.abs(ref).max()))

    def test_submultiplicative(self, system):
        space = system.space
        s = stage_operator(space, space.agent1, space.agent2, 1e4, 1e4, 1e4, 0.3, 7.0,
                           ops=system.ops)
        assert np.isfinite(s.norm)
        assert s.norm <= s.download_norm * s.fusion_norm * s.agent_norm * (1 + 1e-10)

    def test_linear_part_is_square(self, stage):
        assert stage.linear_part.shape == (5, 5)


class TestNormTrace:
    def test_single_record(self):
        tr = norm_trace(lambda n: 0.7, 1)
        assert len(tr.records) == 1 and tr.records[0].product == 0.7

    def test_products_grow_with_norms_above_one(self):
        tr = norm_trace(lambda n: 1.0 + 0.1 * n, 10)
        products = [r.product for r in tr.records]
        assert all(b >= a for a, b in zip(products, products[1:]))

    def test_running_gap_nonincreasing(self):
        tr = norm_trace(lambda n: [2.0, 1.5, 3.0, 1.1, 0.5][n - 1], 5)
        gaps = [r.running_gap for r in tr.records]
        assert gaps == [1.0, 0.5, 0.5, pytest.approx(0.1), pytest.approx(0.1)]

    def test_divergence_flag(self):
        assert norm_trace(lambda n: 10.0, 7).diverged
        assert not norm_trace(lambda n: 0.5, 7).diverged

    def test_geometric_schedule_bounded(self, system):
        rng = np.random.default_rng(3)
        points = [(rng.uniform(-5, 5), rng.choice([-1, 1]) * rng.uniform(5, 10))
                  for _ in range(40)]
        tr = norm_trace(stage_at(system, points, Schedule("geometric", 10.0, 2.0)), 40)
        assert tr.sup_product <= 10.0
        assert not tr.diverged

    def test_rejects_empty_horizon(self):
        with pytest.raises(ValueError):
            norm_trace(lambda n: 1.0, 0)


class TestFixedPointProbe:
    def test_identity_fixes_everything(self):
        fp = fixed_point_probe(np.eye(4), tolerance=1e-12)
        assert fp is not None and fp.residual == 0.0
        assert np.linalg.norm(fp.coordinates) == pytest.approx(1.0, abs=1e-10)

    def test_contraction_has_none(self):
        assert fixed_point_probe(0.5 * np.eye(3), max_iters=50) is None

    def test_deterministic_per_seed(self, system):
        space = system.space
        s = stage_operator(space, space.agent1, space.agent2, 1e3, 1e3, 1e3, 0.5, 6.0,
                           ops=system.ops)
        first = fixed_point_probe(s, 1e-6, 2000, seed=4)
        second = fixed_point_probe(s, 1e-6, 2000, seed=4)
        assert (first is None) == (second is None)
        if first is not None:
            np.testing.assert_array_equal(first.coordinates, second.coordinates)

    def test_dominant_unit_eigenvalue_found(self, rng):
        q = np.linalg.qr(rng.standard_normal((3, 3)))[0]
        a = q @ np.diag([1.0, 0.5, 0.2]) @ q.T
        fp = fixed_point_probe(a, tolerance=1e-10, max_iters=10_000, seed=1)
        assert fp is not None
        assert np.linalg.norm(fp.coordinates) == pytest.approx(1.0, abs=1e-10)
        assert abs(fp.coordinates @ q[:, 0]) == pytest.approx(1.0, abs=1e-9)


class TestOverlapGap:
    def test_quadratic_form_sees_symmetric_part(self, rng):
        p1 = random_psd(rng, 5, 2)
        p2 = random_psd(rng, 5, 3)
        assert projector_overlap_gap(p1, p2) <= 1e-10 * np.linalg.norm(p1 @ p2)

    def test_stage_type(self, system):
        space = system.space
        s = stage_operator(space, space.agent1, space.agent2, 1.0, 1.0, 1.0, 0.0, 5.0)
        assert isinstance(s, StageOperator)
