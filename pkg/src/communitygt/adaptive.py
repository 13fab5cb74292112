"""Adaptive identification: binary splitting and the two-stage community algorithm."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .structure import CommunityStructure, PartitionSet, components, standard_partition
from .testing import TestOracle

__all__ = [
    "AdaptiveResult",
    "binary_splitting",
    "select_representatives",
    "adaptive_community_test",
    "nonoverlapping_baseline",
]


@dataclass(frozen=True)
class AdaptiveResult:
    estimates: np.ndarray
    tests_used: int
    stage_breakdown: dict

    def __post_init__(self):
        if self.tests_used != sum(self.stage_breakdown.values()):
            raise ValueError("tests_used must equal the sum of the stage breakdown")


def _split_positives(num_items: int, test: Callable[[list[int]], int]) -> set[int]:
    """Recursive halving over item indices; returns the positive indices.

    A positive group of size > 1 is split into halves (left half takes the
    extra item) and each half is tested recursively.
    """
    positives: set[int] = set()

    def rec(idx: list[int]) -> None:
        if not idx:
            return
        if test(idx) == 0:
            return
        if len(idx) == 1:
            positives.add(idx[0])
            return
        mid = (len(idx) + 1) // 2
        rec(idx[:mid])
        rec(idx[mid:])

    rec(list(range(num_items)))
    return positives


def binary_splitting(items: Sequence[int], oracle: TestOracle) -> dict[int, int]:
    """Find every defective among ``items`` by recursive halving.

    Returns a status per item id. Zero-error whenever the oracle is noiseless.
    """
    items = list(items)

    def test(idx: list[int]) -> int:
        return oracle.query([items[i] for i in idx])

    positives = _split_positives(len(items), test)
    return {item: int(i in positives) for i, item in enumerate(items)}


def _binary_splitting_pools(pools: Sequence[list[int]], oracle: TestOracle) -> set[int]:
    """Binary splitting over virtual items; each group test pools the union."""

    def test(idx: list[int]) -> int:
        union: set[int] = set()
        for i in idx:
            union.update(pools[i])
        return oracle.query(sorted(union))

    return _split_positives(len(pools), test)


def select_representatives(
    pset: PartitionSet, policy: str = "all", seed: int | None = None
) -> list[int]:
    """Members contributing to a partition set's mixed sample.

    ``policy`` is either "all" or "sample(m)" for a uniform m-subset.
    """
    members = sorted(pset.member_ids)
    if policy == "all":
        return members
    if policy.startswith("sample(") and policy.endswith(")"):
        m = int(policy[len("sample(") : -1])
        if m > len(members):
            raise ValueError(f"cannot sample {m} from a set of {len(members)}")
        rng = np.random.default_rng(seed)
        picked = rng.choice(len(members), size=m, replace=False)
        return [members[i] for i in sorted(picked)]
    raise ValueError(f"unknown representative policy: {policy!r}")


def adaptive_community_test(
    s: CommunityStructure,
    oracle: TestOracle,
    theta: float = 0.5,
    rep_policy: str = "all",
    seed: int | None = None,
) -> AdaptiveResult:
    """Two-stage community identification.

    Outer sets are screened through mixed samples resolved by binary
    splitting; positive outer sets are tested member by member, yielding
    per-set infection-rate estimates. Each inner set is then either tested
    individually (when some already-resolved set with a strictly smaller
    signature shows a rate above ``theta``) or deferred to a final binary
    splitting pass.
    """
    estimates = np.zeros(s.n, dtype=np.int8)
    seed_rng = np.random.default_rng(seed)

    outer_sets: list[PartitionSet] = []
    inner_sets: list[PartitionSet] = []
    for comp in components(s):
        for pset in standard_partition(comp, s):
            (outer_sets if pset.kind == "outer" else inner_sets).append(pset)

    pools = [
        select_representatives(d, rep_policy, int(seed_rng.integers(2**63)))
        for d in outer_sets
    ]
    start = oracle.tests_used
    positive_outer = _binary_splitting_pools(pools, oracle)
    mixed_stage = oracle.tests_used - start

    # rate estimates; sets never individually tested stay at 0
    p_hat: dict[frozenset, float] = {d.signature: 0.0 for d in outer_sets}

    start = oracle.tests_used
    for i in positive_outer:
        d = outer_sets[i]
        members = sorted(d.member_ids)
        hits = 0
        for v in members:
            r = oracle.query([v])
            estimates[v] = r
            hits += r
        p_hat[d.signature] = hits / len(members)

    deferred: list[int] = []
    for b in sorted(inner_sets, key=lambda t: (len(t.signature), sorted(t.signature))):
        trigger = any(
            sig < b.signature and rate > theta for sig, rate in p_hat.items()
        )
        if trigger:
            members = sorted(b.member_ids)
            hits = 0
            for v in members:
                r = oracle.query([v])
                estimates[v] = r
                hits += r
            p_hat[b.signature] = hits / len(members)
        else:
            deferred.extend(sorted(b.member_ids))
    individual_stage = oracle.tests_used - start

    start = oracle.tests_used
    statuses = binary_splitting(deferred, oracle)
    for v, r in statuses.items():
        estimates[v] = r
    residual_group_stage = oracle.tests_used - start

    breakdown = {
        "mixed_stage": mixed_stage,
        "individual_stage": individual_stage,
        "residual_group_stage": residual_group_stage,
    }
    return AdaptiveResult(
        estimates=estimates,
        tests_used=sum(breakdown.values()),
        stage_breakdown=breakdown,
    )


def nonoverlapping_baseline(
    s: CommunityStructure, oracle: TestOracle, seed: int | None = None
) -> AdaptiveResult:
    """Community-pooling baseline that ignores overlap.

    Pools each community whole; members of positive communities are tested
    individually, everyone else is swept by one binary splitting pass.
    """
    estimates = np.zeros(s.n, dtype=np.int8)

    start = oracle.tests_used
    positive = [
        e for e in range(s.num_communities)
        if oracle.query(sorted(s.communities[e])) == 1
    ]
    mixed_stage = oracle.tests_used - start

    start = oracle.tests_used
    tested: set[int] = set()
    for e in positive:
        for v in sorted(s.communities[e]):
            if v in tested:
                continue
            tested.add(v)
            estimates[v] = oracle.query([v])
    individual_stage = oracle.tests_used - start

    start = oracle.tests_used
    remaining = [v for v in range(s.n) if v not in tested]
    for v, r in binary_splitting(remaining, oracle).items():
        estimates[v] = r
    residual_group_stage = oracle.tests_used - start

    breakdown = {
        "mixed_stage": mixed_stage,
        "individual_stage": individual_stage,
        "residual_group_stage": residual_group_stage,
    }
    return AdaptiveResult(
        estimates=estimates,
        tests_used=sum(breakdown.values()),
        stage_breakdown=breakdown,
    )
