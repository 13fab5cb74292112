"""Non-adaptive designs (two-stage block, constant column weight, Bernoulli)
and the COMP family of decoders."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .structure import CommunityStructure, PartitionSet, components, standard_partition
from .testing import TestDesign, TestOutcomes

__all__ = [
    "BlockDesignParams",
    "build_g1",
    "build_g2_general",
    "build_g2_example",
    "build_ccw",
    "build_bernoulli",
    "comp_decode",
    "community_comp_decode",
]


@dataclass(frozen=True)
class BlockDesignParams:
    """Shape of the structured second-stage matrix."""

    c: int  # members per test
    b1: int  # block-rows covering disjoint communities
    b2: int  # block-rows covering overlapping pairs

    def num_communities(self) -> int:
        return (self.b1 + 2 * self.b2) * self.c

    def num_rows(self, M: int, M_o: int) -> int:
        return self.b1 * M + self.b2 * (2 * M - M_o)


def _outer_sets(s: CommunityStructure) -> list[PartitionSet]:
    out = []
    for comp in components(s):
        out.extend(p for p in standard_partition(comp, s) if p.kind == "outer")
    return out


def build_g1(
    s: CommunityStructure,
    mode: str = "one_per_outer",
    seed: int | None = None,
    include_prob: float = 0.5,
) -> TestDesign:
    """First-stage design pooling outer sets as mixed samples.

    ``one_per_outer`` dedicates one row to each outer set. ``grouped(T1)``
    builds T1 rows, each pooling the union of a random subset of outer sets
    (every outer set joins each row independently with ``include_prob``).
    """
    outers = _outer_sets(s)
    if mode == "one_per_outer":
        pools = [sorted(d.member_ids) for d in outers]
        return TestDesign(n=s.n, pools=pools, metadata={"stage": "g1", "mode": mode})
    if mode.startswith("grouped(") and mode.endswith(")"):
        T1 = int(mode[len("grouped(") : -1])
        if T1 < 1:
            raise ValueError("grouped mode needs at least one row")
        rng = np.random.default_rng(seed)
        pools = []
        for _ in range(T1):
            mask = rng.random(len(outers)) < include_prob
            pool: set[int] = set()
            for d, hit in zip(outers, mask):
                if hit:
                    pool.update(d.member_ids)
            pools.append(sorted(pool))
        return TestDesign(n=s.n, pools=pools, metadata={"stage": "g1", "mode": mode})
    raise ValueError(f"unknown g1 mode: {mode!r}")


def build_g2_general(s: CommunityStructure, c: int) -> TestDesign:
    """Second-stage design placing every member in exactly one test of size ≤ c.

    No row holds two members of the same outer set; members of one inner set
    are kept in the same row until its capacity is exhausted.
    """
    if c < 1:
        raise ValueError("c must be at least 1")
    rows: list[list[int]] = []
    row_outers: list[set[int]] = []
    open_rows: list[int] = []  # rows with free capacity, in creation order

    def new_row() -> int:
        rows.append([])
        row_outers.append(set())
        open_rows.append(len(rows) - 1)
        return len(rows) - 1

    def place(row: int, members: list[int]) -> None:
        rows[row].extend(members)
        if len(rows[row]) >= c:
            open_rows.remove(row)

    pset_id = 0
    for comp in components(s):
        for pset in standard_partition(comp, s):
            members = sorted(pset.member_ids)
            if pset.kind == "outer":
                for v in members:
                    target = next(
                        (r for r in open_rows if pset_id not in row_outers[r]), None
                    )
                    if target is None:
                        target = new_row()
                    row_outers[target].add(pset_id)
                    place(target, [v])
            else:
                i = 0
                while i < len(members):
                    chunk = members[i : i + c]
                    target = next(
                        (r for r in open_rows if len(rows[r]) + len(chunk) <= c),
                        None,
                    )
                    if target is None:
                        target = new_row()
                    place(target, chunk)
                    i += len(chunk)
            pset_id += 1
    return TestDesign(n=s.n, pools=rows, metadata={"stage": "g2", "c": c})


def build_g2_example(
    F: int, F_o: int, M: int, M_o: int, c: int, allow_partial: bool = False
) -> TestDesign:
    """Block-identity second stage for the pairwise-overlap layout.

    b1 block-rows of c copies of I_M cover the disjoint communities; b2
    block-rows of c copies of I_{2M-M_o} cover the overlapping pairs. With
    ``allow_partial`` a trailing block-row may carry fewer than c copies
    instead of failing on divisibility.
    """
    if 2 * F_o > F:
        raise ValueError("need 2*F_o <= F")
    if M_o >= M:
        raise ValueError("need M_o < M")
    F_d = F - 2 * F_o
    if not allow_partial and (F_d % c != 0 or F_o % c != 0):
        raise ValueError(f"c={c} must divide both {F_d} and {F_o}")

    pools: list[list[int]] = []
    # disjoint communities: members 0 .. F_d*M, community j owns [j*M, (j+1)*M)
    for block_start in range(0, F_d, c):
        width = min(c, F_d - block_start)
        for r in range(M):
            pools.append([(block_start + i) * M + r for i in range(width)])
    # overlapping pairs: contiguous runs of 2M - M_o members each
    offset = F_d * M
    pair_len = 2 * M - M_o
    for block_start in range(0, F_o, c):
        width = min(c, F_o - block_start)
        for r in range(pair_len):
            pools.append(
                [offset + (block_start + i) * pair_len + r for i in range(width)]
            )
    n = F_d * M + F_o * pair_len
    b1 = -(-F_d // c)
    b2 = -(-F_o // c)
    meta = {"stage": "g2", "c": c, "b1": b1, "b2": b2}
    return TestDesign(n=n, pools=pools, metadata=meta)


def build_ccw(n: int, T: int, w: int, seed: int | None = None) -> TestDesign:
    """Each member joins exactly w tests chosen uniformly without replacement."""
    if not 1 <= w <= T:
        raise ValueError(f"need 1 <= w <= T, got w={w}, T={T}")
    rng = np.random.default_rng(seed)
    pools: list[list[int]] = [[] for _ in range(T)]
    for v in range(n):
        for row in rng.choice(T, size=w, replace=False):
            pools[row].append(v)
    return TestDesign(n=n, pools=pools, metadata={"kind": "ccw", "w": w})


def build_bernoulli(n: int, T: int, theta_prob: float, seed: int | None = None) -> TestDesign:
    """Each entry set independently with probability theta_prob."""
    if not 0.0 <= theta_prob <= 1.0:
        raise ValueError("theta_prob must be in [0, 1]")
    rng = np.random.default_rng(seed)
    mask = rng.random((T, n)) < theta_prob
    pools = [list(np.flatnonzero(mask[t])) for t in range(T)]
    return TestDesign(n=n, pools=pools, metadata={"kind": "bernoulli", "prob": theta_prob})


def comp_decode(d: TestDesign, y: TestOutcomes | np.ndarray) -> np.ndarray:
    """Mark a member clear iff it appears in at least one negative test."""
    outcomes = y.y if isinstance(y, TestOutcomes) else np.asarray(y)
    if len(outcomes) != d.T:
        raise ValueError(f"outcome length {len(outcomes)} != design rows {d.T}")
    statuses = np.ones(d.n, dtype=np.int8)
    for t, pool in enumerate(d.pools):
        if outcomes[t] == 0:
            statuses[pool] = 0
    return statuses


def community_comp_decode(
    g1: TestDesign,
    g2: TestDesign,
    y1: TestOutcomes | np.ndarray,
    y2: TestOutcomes | np.ndarray,
    s: CommunityStructure,
) -> np.ndarray:
    """Two-stage decoding: first-stage negatives clear whole mixed pools,
    the survivors fall back to COMP on the second stage.

    Clearing is per member (a member is clear when some first-stage test
    containing it is negative), which never introduces false negatives on
    noiseless outcomes even for members outside every first-stage pool.
    """
    if g1.n != s.n or g2.n != s.n:
        raise ValueError("designs and structure disagree on member count")
    statuses = comp_decode(g2, y2)
    out1 = y1.y if isinstance(y1, TestOutcomes) else np.asarray(y1)
    if len(out1) != g1.T:
        raise ValueError(f"outcome length {len(out1)} != design rows {g1.T}")
    for t, pool in enumerate(g1.pools):
        if out1[t] == 0:
            statuses[pool] = 0
    return statuses
