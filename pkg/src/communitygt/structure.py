"""Hypergraph community structures: components, standard partition, generators.

Members are integer ids in ``[0, n)``; a community is a non-empty set of
member ids (a hyperedge). Structures are immutable after construction and
safe to share across workers.
"""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "StructureError",
    "CommunityStructure",
    "Component",
    "PartitionSet",
    "build_structure",
    "components",
    "standard_partition",
    "degree",
    "random_structure",
    "pairwise_overlap_structure",
    "structure_to_dict",
    "structure_from_dict",
    "save_structure",
    "load_structure",
]


class StructureError(ValueError):
    """Invalid or infeasible structure parameters."""


@dataclass(frozen=True)
class CommunityStructure:
    """A population of ``n`` members organized in possibly-overlapping communities."""

    n: int
    communities: tuple[frozenset, ...]
    member_index: tuple[tuple[int, ...], ...]  # sorted community ids, per member

    @property
    def num_communities(self) -> int:
        return len(self.communities)

    def degree(self, member: int) -> int:
        """Number of communities the member belongs to."""
        if not 0 <= member < self.n:
            raise StructureError(f"member id {member} out of range [0, {self.n})")
        return len(self.member_index[member])

    def community_sizes(self) -> list[int]:
        return [len(c) for c in self.communities]


@dataclass(frozen=True)
class Component:
    """A maximal set of communities connected via shared members."""

    community_ids: frozenset
    member_ids: frozenset


@dataclass(frozen=True)
class PartitionSet:
    """Members of a component sharing one exact community signature."""

    member_ids: frozenset
    signature: frozenset  # the community ids common to every member
    kind: str  # "outer" | "inner"


def build_structure(n: int, communities: Iterable[Iterable[int]]) -> CommunityStructure:
    """Validate and build a structure from raw community member lists."""
    comms: list[frozenset] = []
    index: list[list[int]] = [[] for _ in range(n)]
    for cid, members in enumerate(communities):
        fs = frozenset(int(v) for v in members)
        if not fs:
            raise StructureError(f"community {cid} is empty")
        for v in fs:
            if not 0 <= v < n:
                raise StructureError(f"member id {v} in community {cid} out of range [0, {n})")
            index[v].append(cid)
        comms.append(fs)
    for v, ids in enumerate(index):
        if not ids:
            raise StructureError(f"member {v} belongs to no community")
    return CommunityStructure(
        n=n,
        communities=tuple(comms),
        member_index=tuple(tuple(sorted(ids)) for ids in index),
    )


def degree(s: CommunityStructure, member: int) -> int:
    return s.degree(member)


def components(s: CommunityStructure) -> list[Component]:
    """Connected components, ordered by their smallest community id."""
    F = s.num_communities
    parent = list(range(F))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for ids in s.member_index:
        for other in ids[1:]:
            union(ids[0], other)

    groups: dict[int, list[int]] = defaultdict(list)
    for e in range(F):
        groups[find(e)].append(e)
    out = []
    for root in sorted(groups):
        cids = groups[root]
        members: set[int] = set()
        for e in cids:
            members.update(s.communities[e])
        out.append(Component(community_ids=frozenset(cids), member_ids=frozenset(members)))
    return out


def standard_partition(c: Component, s: CommunityStructure) -> list[PartitionSet]:
    """Group a component's members by their exact community signature.

    A set is "outer" when no other set in the component has a strictly
    smaller signature (w.r.t. set inclusion), otherwise "inner".
    """
    groups: dict[tuple[int, ...], list[int]] = defaultdict(list)
    for v in c.member_ids:
        groups[s.member_index[v]].append(v)
    sigs = list(groups)
    kinds = {}
    for sig in sigs:
        sig_set = set(sig)
        is_inner = any(set(other) < sig_set for other in sigs if other != sig)
        kinds[sig] = "inner" if is_inner else "outer"
    ordered = sorted(sigs, key=lambda t: (len(t), t))
    return [
        PartitionSet(member_ids=frozenset(groups[sig]), signature=frozenset(sig), kind=kinds[sig])
        for sig in ordered
    ]


def _sample_truncated_geometric(rng: np.random.Generator, p: float, max_degree: int) -> int:
    """Degree on {1..max_degree} with P(k) proportional to (1-p)^(k-1)."""
    if max_degree == 1:
        return 1
    tail = (1.0 - p) ** max_degree
    u = rng.random()
    k = 1 + int(math.floor(math.log1p(-u * (1.0 - tail)) / math.log(1.0 - p)))
    return min(max(k, 1), max_degree)


def _assign_slots(
    rng: np.random.Generator, sizes: np.ndarray, degrees: list[int]
) -> list[list[int]] | None:
    """Deal member slots into communities; returns None when repair fails."""
    slots = np.repeat(np.arange(len(degrees)), degrees)
    rng.shuffle(slots)
    bounds = np.cumsum(sizes)
    chunks = [list(slots[(bounds[i] - sizes[i]): bounds[i]]) for i in range(len(sizes))]
    chunk_sets = [set(c) for c in chunks]

    for i, chunk in enumerate(chunks):
        if len(chunk_sets[i]) == len(chunk):
            continue
        seen: set[int] = set()
        dup_positions = []
        for pos, v in enumerate(chunk):
            if v in seen:
                dup_positions.append(pos)
            seen.add(v)
        for pos in dup_positions:
            v = chunk[pos]
            fixed = False
            for j in rng.permutation(len(chunks)):
                if j == i or v in chunk_sets[j]:
                    continue
                for pos2, u in enumerate(chunks[j]):
                    if u != v and u not in chunk_sets[i] and chunks[j].count(u) == 1:
                        chunks[j][pos2] = v
                        chunk[pos] = u
                        chunk_sets[j].discard(u)
                        chunk_sets[j].add(v)
                        chunk_sets[i].add(u)
                        fixed = True
                        break
                if fixed:
                    break
            if not fixed:
                return None
    return [[int(v) for v in c] for c in chunks]


def random_structure(
    target_F: int,
    size_range: Sequence[int],
    max_degree: int,
    degree_p: float = 0.5,
    seed: int | None = None,
    max_attempts: int = 100,
) -> CommunityStructure:
    """Generate a random structure of ``target_F`` communities.

    Community sizes are uniform on ``size_range``; member degrees follow a
    geometric distribution (success probability ``degree_p``) truncated to
    ``{1..max_degree}``. The member count is emergent: members are created
    until their degrees consume all community slots. Deterministic per seed.
    """
    lo, hi = int(size_range[0]), int(size_range[-1])
    if target_F < 1 or lo < 1 or hi < lo:
        raise StructureError("need target_F >= 1 and a non-empty size_range with min >= 1")
    if max_degree < 1:
        raise StructureError("max_degree must be >= 1")
    if not 0.0 < degree_p < 1.0:
        raise StructureError("degree_p must be in (0, 1)")
    if max_degree > target_F:
        max_degree = target_F
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        sizes = rng.integers(lo, hi + 1, size=target_F)
        total = int(sizes.sum())
        degrees: list[int] = []
        acc = 0
        while acc < total:
            d = _sample_truncated_geometric(rng, degree_p, max_degree)
            d = min(d, total - acc)
            degrees.append(d)
            acc += d
        chunks = _assign_slots(rng, sizes, degrees)
        if chunks is None:
            continue
        return build_structure(len(degrees), chunks)
    raise StructureError("could not generate a feasible structure; relax the parameters")


def pairwise_overlap_structure(F: int, F_o: int, M: int, M_o: int) -> CommunityStructure:
    """``F - 2*F_o`` disjoint communities of size M plus ``F_o`` overlapping pairs.

    Each pair shares exactly ``M_o`` members; member ids are laid out block by
    block, with a pair block ordered as (exclusive-first, shared, exclusive-second).
    """
    if F_o < 0 or 2 * F_o > F:
        raise StructureError("need 0 <= 2*F_o <= F")
    if M < 1:
        raise StructureError("community size M must be >= 1")
    if not 0 <= M_o < M:
        raise StructureError("overlap size M_o must satisfy 0 <= M_o < M")
    comms: list[list[int]] = []
    base = 0
    for _ in range(F - 2 * F_o):
        comms.append(list(range(base, base + M)))
        base += M
    for _ in range(F_o):
        first = list(range(base, base + M))
        second = list(range(base + M - M_o, base + 2 * M - M_o))
        comms.append(first)
        comms.append(second)
        base += 2 * M - M_o
    return build_structure(base, comms)


def structure_to_dict(s: CommunityStructure) -> dict:
    return {"n": s.n, "communities": [sorted(c) for c in s.communities]}


def structure_from_dict(d: dict) -> CommunityStructure:
    return build_structure(int(d["n"]), d["communities"])


def save_structure(s: CommunityStructure, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(structure_to_dict(s), fh)


def load_structure(path: str) -> CommunityStructure:
    with open(path) as fh:
        return structure_from_dict(json.load(fh))
