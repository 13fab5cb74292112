"""Lower bounds on the number of tests: counting, combinatorial, and entropy."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .infection import InfectionParamsII, InfectionState
from .structure import CommunityStructure, components, standard_partition

__all__ = [
    "BoundReport",
    "h2",
    "log2_binom",
    "counting_bound",
    "combinatorial_bound",
    "probabilistic_bound",
]

_EXACT_BINOM_MAX_N = 64


def h2(x: float) -> float:
    """Binary entropy with the limit convention h2(0) = h2(1) = 0."""
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def log2_binom(n: int, k: int) -> float:
    """log2 of the binomial coefficient; exact integer arithmetic for small n."""
    if k < 0 or k > n:
        raise ValueError(f"need 0 <= k <= n, got n={n}, k={k}")
    if n <= _EXACT_BINOM_MAX_N:
        return math.log2(math.comb(n, k))
    return (math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)) / math.log(2.0)


def counting_bound(n: int, k: int) -> float:
    """Structure-free lower bound log2 C(n, k)."""
    return log2_binom(n, k)


@dataclass(frozen=True)
class BoundReport:
    value: float
    terms: tuple[tuple[str, float], ...]
    method: str

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "terms": [{"label": lbl, "value": val} for lbl, val in self.terms],
            "method": self.method,
        }


def combinatorial_bound(s: CommunityStructure, state: InfectionState) -> BoundReport:
    """Structure-aware bound: community choices plus per-partition-set placements."""
    k_f = int(state.community_status.sum())
    terms = [("communities", log2_binom(s.num_communities, k_f))]
    U = state.member_status
    for ci, comp in enumerate(components(s)):
        for pset in standard_partition(comp, s):
            size = len(pset.member_ids)
            infected = int(sum(int(U[v]) for v in pset.member_ids))
            val = log2_binom(size, infected)
            if val != 0.0:
                label = f"component{ci}/sig{'-'.join(map(str, sorted(pset.signature)))}"
                terms.append((label, val))
    value = float(sum(v for _, v in terms))
    return BoundReport(value=value, terms=tuple(terms), method="exact")


def _component_entropy_exact(
    comm_ids: list[int], members: list[int], s: CommunityStructure, params: InfectionParamsII
) -> float:
    pos = {e: i for i, e in enumerate(comm_ids)}
    member_sigs = [[pos[e] for e in s.member_index[v]] for v in members]
    q = params.q
    total = 0.0
    for x in itertools.product((0, 1), repeat=len(comm_ids)):
        lam = sum(x)
        prob = (q ** lam) * ((1.0 - q) ** (len(comm_ids) - lam))
        if prob == 0.0:
            continue
        ent = 0.0
        for v, sig in zip(members, member_sigs):
            p_not = 1.0
            for i in sig:
                if x[i]:
                    p_not *= 1.0 - params.p[comm_ids[i]]
            ent += h2(1.0 - p_not)
        total += prob * ent
    return total


def _component_entropy_mc(
    comm_ids: list[int],
    members: list[int],
    s: CommunityStructure,
    params: InfectionParamsII,
    samples: int,
    rng: np.random.Generator,
) -> float:
    pos = {e: i for i, e in enumerate(comm_ids)}
    p_local = params.p[np.asarray(comm_ids)]
    X = rng.random((samples, len(comm_ids))) < params.q
    total = np.zeros(samples)
    for v in members:
        idx = np.asarray([pos[e] for e in s.member_index[v]], dtype=np.intp)
        p_not = np.prod(1.0 - X[:, idx] * p_local[idx], axis=1)
        p_v = 1.0 - p_not
        inner = (p_v > 0) & (p_v < 1)
        ent = np.zeros(samples)
        pv = p_v[inner]
        ent[inner] = -pv * np.log2(pv) - (1 - pv) * np.log2(1 - pv)
        total += ent
    return float(total.mean())


def probabilistic_bound(
    s: CommunityStructure,
    params: InfectionParamsII,
    exact_max_component: int = 20,
    mc_samples: int = 100_000,
    seed: int | None = 0,
) -> BoundReport:
    """Entropy bound: F*h2(q) plus the expected conditional member entropy.

    Components with at most ``exact_max_component`` communities are enumerated
    exactly over all community-status vectors; larger ones are estimated by
    Monte Carlo over ``mc_samples`` draws.
    """
    rng = np.random.default_rng(seed)
    terms = [("community_entropy", s.num_communities * h2(params.q))]
    used_mc = False
    for ci, comp in enumerate(components(s)):
        comm_ids = sorted(comp.community_ids)
        members = sorted(comp.member_ids)
        if len(comm_ids) <= exact_max_component:
            val = _component_entropy_exact(comm_ids, members, s, params)
        else:
            val = _component_entropy_mc(comm_ids, members, s, params, mc_samples, rng)
            used_mc = True
        terms.append((f"component{ci}", val))
    value = float(sum(v for _, v in terms))
    method = f"monte_carlo({mc_samples})" if used_mc else "exact"
    return BoundReport(value=value, terms=tuple(terms), method=method)
