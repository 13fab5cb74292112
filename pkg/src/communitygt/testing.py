"""Pooled test execution: designs applied to states, and an adaptive oracle.

Noise is a one-sided flip: a truly positive pool reads negative with
probability z, a truly negative pool never flips.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .infection import InfectionState

__all__ = [
    "TestDesign",
    "TestOutcomes",
    "TestOracle",
    "run_design",
    "query_mixed",
    "design_to_dict",
    "design_from_dict",
    "save_design",
    "load_design",
    "outcomes_to_dict",
    "outcomes_from_dict",
]


@dataclass
class TestDesign:
    """A T x n pooling design stored sparsely as per-row member-id arrays."""

    n: int
    pools: list[np.ndarray]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        norm = []
        for i, pool in enumerate(self.pools):
            arr = np.unique(np.asarray(pool, dtype=np.intp))
            if arr.size and (arr[0] < 0 or arr[-1] >= self.n):
                raise ValueError(f"row {i} pools a member id outside [0, {self.n})")
            norm.append(arr)
        self.pools = norm

    @property
    def T(self) -> int:
        return len(self.pools)

    def member_rows(self) -> list[list[int]]:
        """Rows containing each member (inverse of pools)."""
        rows: list[list[int]] = [[] for _ in range(self.n)]
        for r, pool in enumerate(self.pools):
            for v in pool:
                rows[int(v)].append(r)
        return rows


@dataclass(frozen=True)
class TestOutcomes:
    y: np.ndarray  # (T,) uint8
    z: float


def _flip_rng(seed: int | None, row: int) -> np.random.Generator:
    return np.random.default_rng([0 if seed is None else int(seed), int(row)])


def run_design(
    d: TestDesign, state: InfectionState, z: float = 0.0, seed: int | None = None
) -> TestOutcomes:
    """Apply every pool of the design to the state, with one-sided noise z.

    Noise draws are keyed by (seed, row index), so a given row sees the same
    flip decision regardless of the other rows.
    """
    if state.member_status.shape[0] != d.n:
        raise ValueError(f"state has {state.member_status.shape[0]} members, design expects {d.n}")
    U = state.member_status
    y = np.zeros(d.T, dtype=np.uint8)
    for r, pool in enumerate(d.pools):
        truth = bool(U[pool].any()) if pool.size else False
        if truth:
            if z > 0.0 and _flip_rng(seed, r).random() < z:
                y[r] = 0
            else:
                y[r] = 1
    return TestOutcomes(y=y, z=float(z))


class TestOracle:
    """Stateful test counter over a hidden infection state.

    Each query consumes exactly one test; outcomes pass through the one-sided
    noise channel. Noise draws are keyed by (seed, query index).
    """

    def __init__(self, state: InfectionState, z: float = 0.0, seed: int | None = None):
        self._state = state
        self.z = float(z)
        self.seed = seed
        self.tests_used = 0
        self.n = int(state.member_status.shape[0])

    def query(self, pool: Iterable[int]) -> int:
        idx = self.tests_used
        self.tests_used += 1
        truth = 0
        for v in pool:
            v = int(v)
            if not 0 <= v < self.n:
                raise ValueError(f"member id {v} out of range [0, {self.n})")
            if self._state.member_status[v]:
                truth = 1
        if truth and self.z > 0.0 and _flip_rng(self.seed, idx).random() < self.z:
            return 0
        return truth


def query_mixed(oracle: TestOracle, pools: Sequence[Iterable[int]]) -> list[int]:
    """One test per mixed sample: each pool is tested as a unit."""
    return [oracle.query(pool) for pool in pools]


def design_to_dict(d: TestDesign) -> dict:
    out = {"T": d.T, "n": d.n, "pools": [p.astype(int).tolist() for p in d.pools]}
    if d.metadata:
        out["metadata"] = d.metadata
    return out


def design_from_dict(data: dict) -> TestDesign:
    d = TestDesign(
        n=int(data["n"]),
        pools=[np.asarray(p, dtype=np.intp) for p in data["pools"]],
        metadata=dict(data.get("metadata", {})),
    )
    if "T" in data and int(data["T"]) != d.T:
        raise ValueError("design file is inconsistent: T does not match pools")
    return d


def save_design(d: TestDesign, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(design_to_dict(d), fh)


def load_design(path: str) -> TestDesign:
    with open(path) as fh:
        return design_from_dict(json.load(fh))


def outcomes_to_dict(o: TestOutcomes) -> dict:
    return {"z": o.z, "y": o.y.astype(int).tolist()}


def outcomes_from_dict(d: dict) -> TestOutcomes:
    return TestOutcomes(y=np.asarray(d["y"], dtype=np.uint8), z=float(d["z"]))
