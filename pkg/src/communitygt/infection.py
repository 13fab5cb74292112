"""Infection sampling: fixed-count (combinatorial) and probabilistic models."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .structure import CommunityStructure, StructureError

__all__ = [
    "InfectionState",
    "InfectionParamsII",
    "sample_combinatorial",
    "member_infection_prob",
    "sample_probabilistic",
    "infected_counts",
    "state_to_dict",
    "state_from_dict",
]


@dataclass(frozen=True)
class InfectionState:
    """Binary infection flags for communities (X) and members (U)."""

    community_status: np.ndarray  # (F,) uint8
    member_status: np.ndarray  # (n,) uint8

    def to_dict(self) -> dict:
        return {
            "X": self.community_status.astype(int).tolist(),
            "U": self.member_status.astype(int).tolist(),
        }


def state_to_dict(state: InfectionState) -> dict:
    return state.to_dict()


def state_from_dict(d: dict) -> InfectionState:
    return InfectionState(
        community_status=np.asarray(d["X"], dtype=np.uint8),
        member_status=np.asarray(d["U"], dtype=np.uint8),
    )


@dataclass(frozen=True)
class InfectionParamsII:
    """Probabilistic model parameters: community rate q, per-community member rates."""

    q: float
    p: np.ndarray  # (F,) member infection rate per community

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValueError("q must lie in [0, 1]")
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 1 or ((p < 0) | (p > 1)).any():
            raise ValueError("every community rate must lie in [0, 1]")
        object.__setattr__(self, "p", p)


def member_infection_prob(rates_of_infected_communities: Sequence[float]) -> float:
    """Probability of infection via any of the given communities: 1 - prod(1 - p_e)."""
    prod = 1.0
    for r in rates_of_infected_communities:
        if not 0.0 <= r <= 1.0:
            raise ValueError(f"rate {r} outside [0, 1]")
        prod *= 1.0 - r
    return 1.0 - prod


def _resolve_k_m(k_m, size: int) -> int:
    if isinstance(k_m, float):
        return max(1, int(round(k_m * size)))
    return int(k_m)


def sample_combinatorial(
    s: CommunityStructure, k_f: int, k_m, seed: int | None = None
) -> InfectionState:
    """Infect k_f uniform communities, then k_m uniform members inside each.

    ``k_m`` may be an integer count or a float fraction of the community size
    (rounded to nearest, at least one member). A member picked by any infected
    community is infected.
    """
    F = s.num_communities
    if not 0 <= k_f <= F:
        raise StructureError(f"k_f={k_f} must lie in [0, {F}]")
    rng = np.random.default_rng(seed)
    X = np.zeros(F, dtype=np.uint8)
    U = np.zeros(s.n, dtype=np.uint8)
    if k_f > 0:
        infected = rng.choice(F, size=k_f, replace=False)
        for e in sorted(int(e) for e in infected):
            members = sorted(s.communities[e])
            k = _resolve_k_m(k_m, len(members))
            if k < 1 or k > len(members):
                raise StructureError(
                    f"k_m={k} infeasible for community {e} of size {len(members)}"
                )
            chosen = rng.choice(len(members), size=k, replace=False)
            X[e] = 1
            for idx in chosen:
                U[members[int(idx)]] = 1
    return InfectionState(community_status=X, member_status=U)


def sample_probabilistic(
    s: CommunityStructure, params: InfectionParamsII, seed: int | None = None
) -> InfectionState:
    """Communities infected i.i.d. w.p. q; members via their infected communities."""
    F = s.num_communities
    rng = np.random.default_rng(seed)
    X = (rng.random(F) < params.q).astype(np.uint8)
    p_not = np.ones(s.n)
    for e in np.flatnonzero(X):
        members = np.fromiter(s.communities[e], dtype=np.intp)
        p_not[members] *= 1.0 - params.p[e]
    U = (rng.random(s.n) < 1.0 - p_not).astype(np.uint8)
    return InfectionState(community_status=X, member_status=U)


def infected_counts(state: InfectionState, s: CommunityStructure) -> dict:
    """Total infected members k, infected communities k_f, and per-community counts."""
    U = state.member_status
    per_comm = [int(sum(int(U[v]) for v in c)) for c in s.communities]
    return {
        "k": int(state.member_status.sum()),
        "k_f": int(state.community_status.sum()),
        "k_m": per_comm,
    }
