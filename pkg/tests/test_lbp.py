import numpy as np
import pytest

from communitygt.infection import InfectionParamsII, sample_probabilistic
from communitygt.lbp import (
    build_factor_graph,
    default_p_iid,
    harden,
    lbp_decode,
    nc_lbp_decode,
)
from communitygt.nonadaptive import build_ccw
from communitygt.structure import build_structure, random_structure
from communitygt.testing import TestDesign as Design
from communitygt.testing import run_design

from _reference import (
    exact_posteriors,
    exact_posteriors_iid,
    factor_graph_is_tree,
    random_tree_instance,
)


def sample_outcomes(s, params, d, z, seed):
    state = sample_probabilistic(s, params, seed=seed)
    return state, run_design(d, state, z=z, seed=seed)


class TestBuildFactorGraph:
    def test_edge_lists(self):
        s = build_structure(3, [{0, 1}, {1, 2}])
        d = Design(n=3, pools=[np.array([0, 1]), np.array([2])])
        params = InfectionParamsII(q=0.2, p=np.array([0.5, 0.7]))
        g = build_factor_graph(s, d, params, z=0.1)
        assert g.n == 3 and g.F == 2 and g.T == 2
        assert g.me_member.size == 4  # member 1 sits in both communities
        assert g.tu_member.size == 3
        assert g.membership_degree(1) == 2
        # p_edge is gathered per membership edge
        edge = (g.me_member == 1) & (g.me_comm == 1)
        assert g.p_edge[edge] == pytest.approx(0.7)

    def test_mismatched_design(self):
        s = build_structure(3, [{0, 1, 2}])
        d = Design(n=4, pools=[np.array([0])])
        with pytest.raises(ValueError):
            build_factor_graph(s, d, InfectionParamsII(q=0.1, p=np.array([0.5])), z=0.0)


class TestTreeExactness:
    def test_structured_matches_enumeration_on_trees(self):
        rng = np.random.default_rng(42)
        for _ in range(40):
            s, params, d, z = random_tree_instance(rng)
            assert factor_graph_is_tree(s, d)
            state, out = sample_outcomes(s, params, d, z, int(rng.integers(10**6)))
            g = build_factor_graph(s, d, params, z=z)
            beliefs = lbp_decode(g, out, iters=20)
            px_ref, pu_ref = exact_posteriors(s, params, d, out.y, z)
            np.testing.assert_allclose(beliefs.posterior_u[:, 1], pu_ref, atol=1e-9)
            np.testing.assert_allclose(beliefs.posterior_x[:, 1], px_ref, atol=1e-9)

    def test_agnostic_matches_enumeration_on_trees(self):
        rng = np.random.default_rng(7)
        checked = 0
        while checked < 25:
            n = int(rng.integers(2, 8))
            T = int(rng.integers(1, 4))
            pools = [
                rng.choice(n, size=int(rng.integers(1, min(3, n) + 1)), replace=False)
                for _ in range(T)
            ]
            d = Design(n=n, pools=pools)
            # singleton communities leave only the test half of the graph,
            # so this checks acyclicity of the rows alone
            if not factor_graph_is_tree(build_structure(n, [{v} for v in range(n)]), d):
                continue
            p_iid = float(rng.uniform(0.05, 0.5))
            z = float(rng.choice([0.0, 0.2]))
            u = (rng.random(n) < p_iid).astype(np.uint8)
            from communitygt.infection import InfectionState

            state = InfectionState(
                community_status=np.zeros(1, dtype=np.uint8), member_status=u
            )
            out = run_design(d, state, z=z, seed=int(rng.integers(10**6)))
            marg = nc_lbp_decode(d, out, p_iid=p_iid, z=z, iters=20)
            ref = exact_posteriors_iid(d, out.y, p_iid, z)
            np.testing.assert_allclose(marg, ref, atol=1e-9)
            checked += 1


class TestLoopyBehavior:
    def test_marginals_are_probabilities(self):
        s = random_structure(target_F=8, size_range=(3, 6), max_degree=3, seed=1)
        params = InfectionParamsII(q=0.2, p=np.full(s.num_communities, 0.6))
        d = build_ccw(n=s.n, T=30, w=4, seed=0)
        state, out = sample_outcomes(s, params, d, z=0.05, seed=3)
        g = build_factor_graph(s, d, params, z=0.05)
        beliefs = lbp_decode(g, out, iters=20)
        assert ((beliefs.posterior_u >= 0) & (beliefs.posterior_u <= 1)).all()
        np.testing.assert_allclose(beliefs.posterior_u.sum(axis=1), 1.0)
        np.testing.assert_allclose(beliefs.posterior_x.sum(axis=1), 1.0)
        assert beliefs.iteration == 20
        assert beliefs.op_counts["factor_edge_ops"] > 0

    def test_converged_for_extra_iterations(self):
        s = random_structure(target_F=6, size_range=(3, 5), max_degree=2, seed=4)
        params = InfectionParamsII(q=0.15, p=np.full(s.num_communities, 0.5))
        d = build_ccw(n=s.n, T=25, w=4, seed=2)
        state, out = sample_outcomes(s, params, d, z=0.0, seed=5)
        g = build_factor_graph(s, d, params, z=0.0)
        a = lbp_decode(g, out, iters=20).posterior_u
        b = lbp_decode(g, out, iters=50).posterior_u
        np.testing.assert_allclose(a, b, atol=1e-6)

    def test_noiseless_negative_tests_clear_members(self):
        s = random_structure(target_F=6, size_range=(3, 5), max_degree=2, seed=8)
        params = InfectionParamsII(q=0.2, p=np.full(s.num_communities, 0.6))
        d = build_ccw(n=s.n, T=40, w=5, seed=1)
        state, out = sample_outcomes(s, params, d, z=0.0, seed=9)
        g = build_factor_graph(s, d, params, z=0.0)
        marg = lbp_decode(g, out, iters=20).member_marginals()
        for v in range(s.n):
            in_negative = any(
                out.y[t] == 0 and v in d.pools[t] for t in range(d.T)
            )
            if in_negative:
                assert marg[v] < 1e-6

    def test_structured_beats_agnostic_on_average(self):
        # with strong community correlation the structured decoder should be
        # at least as accurate as the agnostic one
        rng = np.random.default_rng(11)
        err_c, err_nc = 0, 0
        for trial in range(20):
            s = random_structure(target_F=10, size_range=(4, 7), max_degree=2,
                                 seed=int(rng.integers(10**6)))
            params = InfectionParamsII(q=0.15, p=np.full(s.num_communities, 0.9))
            d = build_ccw(n=s.n, T=s.n // 2, w=4, seed=trial)
            state, out = sample_outcomes(s, params, d, z=0.0, seed=trial)
            g = build_factor_graph(s, d, params, z=0.0)
            est_c = harden(lbp_decode(g, out, iters=20).member_marginals())
            p_iid = default_p_iid(s, params, samples=2000, seed=trial)
            est_nc = harden(nc_lbp_decode(d, out, p_iid=p_iid, z=0.0, iters=20))
            err_c += int(np.sum(est_c != state.member_status))
            err_nc += int(np.sum(est_nc != state.member_status))
        assert err_c <= err_nc


class TestHarden:
    def test_threshold_inclusive(self):
        assert harden(np.array([0.49, 0.5, 0.51])).tolist() == [0, 1, 1]

    def test_two_column_input(self):
        b = np.array([[0.8, 0.2], [0.1, 0.9]])
        assert harden(b).tolist() == [0, 1]

    def test_custom_threshold(self):
        assert harden(np.array([0.3, 0.7]), threshold=0.25).tolist() == [1, 1]

    def test_bad_threshold(self):
        with pytest.raises(ValueError):
            harden(np.array([0.5]), threshold=0.0)


class TestDefaultPIid:
    def test_matches_exact_rate(self):
        # two disjoint communities: rate is q*p for everyone
        s = build_structure(4, [{0, 1}, {2, 3}])
        params = InfectionParamsII(q=0.3, p=np.array([0.5, 0.5]))
        est = default_p_iid(s, params, samples=200_000, seed=0)
        assert est == pytest.approx(0.15, abs=0.005)

    def test_overlap_raises_rate(self):
        s = build_structure(3, [{0, 1}, {1, 2}])
        params = InfectionParamsII(q=0.5, p=np.array([0.6, 0.6]))
        est = default_p_iid(s, params, samples=200_000, seed=1)
        # member 1: 1-(1-0.5*0.6)^2 contribution pushes the average above q*p
        expected = (2 * 0.3 + (2 * 0.5 * (1 - 0.5) * 0.6 + 0.25 * (1 - 0.4**2))) / 3
        assert est == pytest.approx(expected, abs=0.005)
