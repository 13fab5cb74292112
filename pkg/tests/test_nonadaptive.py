import numpy as np
import pytest

from communitygt.infection import InfectionState, sample_combinatorial
from communitygt.nonadaptive import (
    BlockDesignParams,
    build_bernoulli,
    build_ccw,
    build_g1,
    build_g2_example,
    build_g2_general,
    community_comp_decode,
    comp_decode,
)
from communitygt.structure import (
    components,
    pairwise_overlap_structure,
    random_structure,
    standard_partition,
)
from communitygt.testing import run_design


def make_state(n, infected_ids):
    u = np.zeros(n, dtype=np.uint8)
    u[list(infected_ids)] = 1
    return InfectionState(community_status=np.zeros(1, dtype=np.uint8), member_status=u)


class TestBlockDesignParams:
    def test_shape_arithmetic(self):
        p = BlockDesignParams(c=3, b1=4, b2=2)
        assert p.num_communities() == (4 + 2 * 2) * 3
        assert p.num_rows(M=10, M_o=2) == 4 * 10 + 2 * 18


class TestBuildG1:
    def test_one_per_outer(self):
        s = pairwise_overlap_structure(F=6, F_o=2, M=3, M_o=1)
        g1 = build_g1(s)
        outer = [
            p
            for comp in components(s)
            for p in standard_partition(comp, s)
            if p.kind == "outer"
        ]
        assert g1.T == len(outer)
        pool_sets = {frozenset(map(int, pool)) for pool in g1.pools}
        assert pool_sets == {frozenset(p.member_ids) for p in outer}

    def test_grouped_shape(self):
        s = pairwise_overlap_structure(F=6, F_o=2, M=3, M_o=1)
        g1 = build_g1(s, mode="grouped(4)", seed=0)
        assert g1.T == 4
        assert g1.n == s.n

    def test_grouped_deterministic(self):
        s = pairwise_overlap_structure(F=6, F_o=2, M=3, M_o=1)
        a = build_g1(s, mode="grouped(5)", seed=3)
        b = build_g1(s, mode="grouped(5)", seed=3)
        assert [p.tolist() for p in a.pools] == [p.tolist() for p in b.pools]

    def test_bad_mode(self):
        s = pairwise_overlap_structure(F=4, F_o=0, M=3, M_o=0)
        with pytest.raises(ValueError):
            build_g1(s, mode="grouped(0)")
        with pytest.raises(ValueError):
            build_g1(s, mode="columns")


class TestBuildG2General:
    def _check_valid(self, s, g2, c):
        seen = np.zeros(s.n, dtype=int)
        for pool in g2.pools:
            assert len(pool) <= c
            seen[pool] += 1
        assert (seen == 1).all()

    def test_every_member_exactly_once(self):
        rng = np.random.default_rng(1)
        for trial in range(10):
            s = random_structure(
                target_F=int(rng.integers(3, 15)),
                size_range=(3, 8),
                max_degree=int(rng.integers(1, 4)),
                seed=int(rng.integers(10**6)),
            )
            c = int(rng.integers(1, 6))
            self._check_valid(s, build_g2_general(s, c), c)

    def test_outer_members_of_same_set_in_distinct_rows(self):
        s = pairwise_overlap_structure(F=4, F_o=0, M=4, M_o=0)
        g2 = build_g2_general(s, c=4)
        outer = {
            frozenset(p.member_ids)
            for comp in components(s)
            for p in standard_partition(comp, s)
        }
        for pool in g2.pools:
            for pset in outer:
                assert len(pset & set(map(int, pool))) <= 1

    def test_c_one_is_individual_testing(self):
        s = pairwise_overlap_structure(F=3, F_o=0, M=3, M_o=0)
        g2 = build_g2_general(s, c=1)
        assert g2.T == s.n

    def test_row_count_near_optimal(self):
        s = random_structure(target_F=20, size_range=(5, 10), max_degree=3, seed=2)
        c = 4
        g2 = build_g2_general(s, c)
        assert g2.T <= -(-s.n // c) + len(
            [p for comp in components(s) for p in standard_partition(comp, s)]
        )


class TestBuildG2Example:
    def test_divisibility_enforced(self):
        with pytest.raises(ValueError):
            build_g2_example(F=10, F_o=2, M=4, M_o=1, c=4)

    def test_allow_partial(self):
        g2 = build_g2_example(F=10, F_o=2, M=4, M_o=1, c=4, allow_partial=True)
        seen = np.zeros(g2.n, dtype=int)
        for pool in g2.pools:
            seen[pool] += 1
        assert (seen == 1).all()

    def test_matches_pairwise_layout(self):
        F, F_o, M, M_o, c = 6, 2, 3, 1, 2
        s = pairwise_overlap_structure(F, F_o, M, M_o)
        g2 = build_g2_example(F, F_o, M, M_o, c)
        assert g2.n == s.n
        # each pool holds at most one member per community
        for pool in g2.pools:
            for comm in s.communities:
                assert len(comm & set(map(int, pool))) <= 1

    def test_row_count_formula(self):
        F, F_o, M, M_o, c = 12, 2, 5, 2, 2
        g2 = build_g2_example(F, F_o, M, M_o, c)
        b1, b2 = -(-(F - 2 * F_o) // c), -(-F_o // c)
        assert g2.T == b1 * M + b2 * (2 * M - M_o)
        assert g2.metadata["b1"] == b1
        assert g2.metadata["b2"] == b2


class TestRandomDesigns:
    def test_ccw_column_weight(self):
        d = build_ccw(n=50, T=20, w=5, seed=0)
        weights = np.zeros(50, dtype=int)
        for pool in d.pools:
            weights[pool] += 1
        assert (weights == 5).all()

    def test_ccw_bad_w(self):
        with pytest.raises(ValueError):
            build_ccw(n=10, T=5, w=6)
        with pytest.raises(ValueError):
            build_ccw(n=10, T=5, w=0)

    def test_ccw_deterministic(self):
        a = build_ccw(n=30, T=10, w=3, seed=7)
        b = build_ccw(n=30, T=10, w=3, seed=7)
        assert [p.tolist() for p in a.pools] == [p.tolist() for p in b.pools]

    def test_bernoulli_density(self):
        d = build_bernoulli(n=200, T=100, theta_prob=0.1, seed=1)
        total = sum(len(p) for p in d.pools)
        assert total / (200 * 100) == pytest.approx(0.1, abs=0.01)

    def test_bernoulli_bad_prob(self):
        with pytest.raises(ValueError):
            build_bernoulli(n=10, T=5, theta_prob=1.2)


class TestCompDecode:
    def test_printed_example(self):
        from communitygt.testing import TestDesign as Design

        d = Design(n=3, pools=[np.array([0, 1]), np.array([1, 2]), np.array([2])])
        y = np.array([1, 0, 0], dtype=np.uint8)
        assert comp_decode(d, y).tolist() == [1, 0, 0]

    def test_no_negative_tests_marks_everyone(self):
        from communitygt.testing import TestDesign as Design

        d = Design(n=4, pools=[np.array([0, 1])])
        assert comp_decode(d, np.array([1])).tolist() == [1, 1, 1, 1]

    def test_never_false_negative_noiseless(self):
        rng = np.random.default_rng(4)
        for trial in range(50):
            n = int(rng.integers(5, 60))
            T = int(rng.integers(3, 40))
            d = build_bernoulli(n, T, 0.2, seed=trial)
            u = (rng.random(n) < 0.15).astype(np.uint8)
            y = run_design(d, make_state(n, np.flatnonzero(u)))
            est = comp_decode(d, y)
            assert (est >= u).all()

    def test_length_mismatch(self):
        d = build_ccw(n=5, T=4, w=2, seed=0)
        with pytest.raises(ValueError):
            comp_decode(d, np.array([1, 0]))


class TestCommunityCompDecode:
    def _run(self, s, state, c=2, seed=0):
        g1 = build_g1(s)
        g2 = build_g2_general(s, c)
        y1 = run_design(g1, state)
        y2 = run_design(g2, state)
        return community_comp_decode(g1, g2, y1, y2, s)

    def test_all_negative_first_stage_clears_structure(self):
        # on a structure without inner sets, all-negative mixed samples clear
        # every member regardless of the second stage
        s = pairwise_overlap_structure(F=4, F_o=0, M=3, M_o=0)
        state = make_state(s.n, [])
        est = self._run(s, state)
        assert est.sum() == 0

    def test_never_false_negative_noiseless(self):
        rng = np.random.default_rng(6)
        for trial in range(40):
            s = random_structure(
                target_F=int(rng.integers(3, 12)),
                size_range=(3, 7),
                max_degree=int(rng.integers(1, 4)),
                seed=int(rng.integers(10**6)),
            )
            state = sample_combinatorial(s, k_f=2, k_m=2, seed=trial)
            est = self._run(s, state, c=int(rng.integers(1, 5)), seed=trial)
            assert (est >= state.member_status).all()

    def test_fewer_false_positives_than_second_stage_alone(self):
        rng = np.random.default_rng(8)
        worse = 0
        for trial in range(20):
            s = random_structure(target_F=10, size_range=(4, 8), max_degree=3,
                                 seed=int(rng.integers(10**6)))
            state = sample_combinatorial(s, k_f=2, k_m=1, seed=trial)
            g1 = build_g1(s)
            g2 = build_g2_general(s, 3)
            y1 = run_design(g1, state)
            y2 = run_design(g2, state)
            two_stage = community_comp_decode(g1, g2, y1, y2, s)
            alone = comp_decode(g2, y2)
            assert two_stage.sum() <= alone.sum()

    def test_design_structure_mismatch(self):
        s = pairwise_overlap_structure(F=4, F_o=0, M=3, M_o=0)
        g1 = build_g1(s)
        g2 = build_ccw(n=5, T=4, w=2, seed=0)
        with pytest.raises(ValueError):
            community_comp_decode(g1, g2, np.zeros(g1.T), np.zeros(4), s)
