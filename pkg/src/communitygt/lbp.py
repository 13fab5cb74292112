"""Loopy belief propagation over the infection factor graph.

Variables are the community flags X_e and member flags U_v; factors are the
community priors, the membership factors Pr(U_v | X of v's communities), and
the one-sided-noise test factors. All messages are 2-vectors over {0, 1} and
are kept normalized, so only the probability-of-1 component is stored.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .infection import InfectionParamsII
from .structure import CommunityStructure
from .testing import TestDesign, TestOutcomes

__all__ = [
    "FactorGraph",
    "BeliefState",
    "build_factor_graph",
    "lbp_decode",
    "nc_lbp_decode",
    "harden",
    "default_p_iid",
]

_FLOOR = 1e-12


@dataclass(frozen=True)
class FactorGraph:
    """Sparse adjacency of the factor graph, stored as flat edge lists."""

    n: int
    F: int  # 0 for the community-agnostic variant
    T: int
    # membership edges: one per (member, community) incidence
    me_member: np.ndarray
    me_comm: np.ndarray
    # test edges: one per (test row, member) incidence
    tu_test: np.ndarray
    tu_member: np.ndarray
    q: float
    p_edge: np.ndarray  # per-community rate, gathered per membership edge
    z: float
    prior_u: np.ndarray | None = None  # member prior for the agnostic variant

    def membership_degree(self, v: int) -> int:
        return int(np.count_nonzero(self.me_member == v))


@dataclass
class BeliefState:
    posterior_x: np.ndarray  # (F, 2)
    posterior_u: np.ndarray  # (n, 2)
    iteration: int
    messages: dict = field(default_factory=dict)
    op_counts: dict = field(default_factory=dict)

    def member_marginals(self) -> np.ndarray:
        """P(U_v = 1) per member."""
        return self.posterior_u[:, 1].copy()


def build_factor_graph(
    s: CommunityStructure, d: TestDesign, params: InfectionParamsII, z: float
) -> FactorGraph:
    if d.n != s.n:
        raise ValueError(f"design expects {d.n} members, structure has {s.n}")
    if len(params.p) != s.num_communities:
        raise ValueError("one member rate per community required")
    me_member = []
    me_comm = []
    for v in range(s.n):
        for e in s.member_index[v]:
            me_member.append(v)
            me_comm.append(e)
    tu_test = []
    tu_member = []
    for t, pool in enumerate(d.pools):
        for v in pool:
            tu_test.append(t)
            tu_member.append(int(v))
    me_comm_arr = np.asarray(me_comm, dtype=np.intp)
    return FactorGraph(
        n=s.n,
        F=s.num_communities,
        T=d.T,
        me_member=np.asarray(me_member, dtype=np.intp),
        me_comm=me_comm_arr,
        tu_test=np.asarray(tu_test, dtype=np.intp),
        tu_member=np.asarray(tu_member, dtype=np.intp),
        q=params.q,
        p_edge=np.asarray(params.p, dtype=float)[me_comm_arr],
        z=float(z),
    )


def _group_products(values: np.ndarray, groups: np.ndarray, num_groups: int) -> np.ndarray:
    """Per-group product of clamped positive values; empty groups yield 1."""
    logs = np.bincount(groups, weights=np.log(values), minlength=num_groups)
    return np.exp(logs)


def _clamp(a: np.ndarray) -> np.ndarray:
    return np.clip(a, _FLOOR, 1.0)


def _normalize_pair(m0: np.ndarray, m1: np.ndarray) -> np.ndarray:
    """Return the 1-component of the normalized [m0, m1] messages."""
    m0 = _clamp(m0)
    m1 = _clamp(m1)
    return m1 / (m0 + m1)


def _run_lbp(g: FactorGraph, y: np.ndarray, iters: int) -> BeliefState:
    n, F, T = g.n, g.F, g.T
    z = g.z
    y = np.asarray(y, dtype=float)
    me_v, me_e = g.me_member, g.me_comm
    tu_t, tu_v = g.tu_test, g.tu_member
    has_struct = F > 0

    # variable-to-factor messages (probability-of-1 components)
    s_msg = np.full(me_v.shape, 0.5)  # X_e -> membership factor of v
    w_msg = np.full(n, 0.5)  # U_v -> its membership factor
    u2t = np.full(tu_v.shape, 0.5)  # U_v -> test factor
    # factor-to-variable messages
    nu = np.full(n, 0.5)  # membership -> U_v
    mux = np.full(me_v.shape, 0.5)  # membership -> X_e
    t2u = np.full(tu_v.shape, 0.5)  # test -> U_v

    if not has_struct:
        nu = g.prior_u.astype(float).copy()

    edge_ops = 0
    y_t = y[tu_t]
    mu1_t2u = (1.0 - y_t) * z + y_t * (1.0 - z)  # neighbor-independent

    for _ in range(iters):
        # factor nodes
        if has_struct:
            gvals = _clamp(1.0 - s_msg * g.p_edge)
            gprod = _group_products(gvals, me_v, n)
            nu = _normalize_pair(gprod, 1.0 - gprod)
            R = _clamp(gprod[me_v] / gvals)
            w0e, w1e = (1.0 - w_msg)[me_v], w_msg[me_v]
            mu0 = w0e * R + w1e * (1.0 - R)
            onep = (1.0 - g.p_edge) * R
            mu1 = w0e * onep + w1e * (1.0 - onep)
            mux = _normalize_pair(mu0, mu1)
            edge_ops += 2 * me_v.size

        s0 = _clamp(1.0 - u2t)
        prod0 = _clamp(_group_products(s0, tu_t, T)[tu_t] / s0)
        P = (1.0 - z) * (1.0 - prod0)
        mu0_t2u = (1.0 - y_t) * (1.0 - P) + y_t * P
        t2u = _normalize_pair(mu0_t2u, mu1_t2u)
        edge_ops += tu_v.size

        # variable nodes
        tprod1 = _group_products(_clamp(t2u), tu_v, n)
        tprod0 = _group_products(_clamp(1.0 - t2u), tu_v, n)
        if has_struct:
            w_msg = _normalize_pair(tprod0, tprod1)
            xprod1 = _group_products(_clamp(mux), me_e, F)
            xprod0 = _group_products(_clamp(1.0 - mux), me_e, F)
            ex1 = _clamp(xprod1[me_e] / _clamp(mux))
            ex0 = _clamp(xprod0[me_e] / _clamp(1.0 - mux))
            s_msg = _normalize_pair((1.0 - g.q) * ex0, g.q * ex1)
        u1 = nu[tu_v] * _clamp(tprod1[tu_v] / _clamp(t2u))
        u0 = (1.0 - nu[tu_v]) * _clamp(tprod0[tu_v] / _clamp(1.0 - t2u))
        u2t = _normalize_pair(u0, u1)

    tprod1 = _group_products(_clamp(t2u), tu_v, n)
    tprod0 = _group_products(_clamp(1.0 - t2u), tu_v, n)
    pu1 = nu * tprod1
    pu0 = (1.0 - nu) * tprod0
    pu = _normalize_pair(pu0, pu1)
    posterior_u = np.column_stack([1.0 - pu, pu])

    if has_struct:
        xprod1 = _group_products(_clamp(mux), me_e, F)
        xprod0 = _group_products(_clamp(1.0 - mux), me_e, F)
        px = _normalize_pair((1.0 - g.q) * xprod0, g.q * xprod1)
        posterior_x = np.column_stack([1.0 - px, px])
    else:
        posterior_x = np.zeros((0, 2))

    messages = {
        "membership_to_member": nu,
        "membership_to_community": mux,
        "test_to_member": t2u,
        "member_to_test": u2t,
        "community_to_membership": s_msg,
        "member_to_membership": w_msg,
    }
    return BeliefState(
        posterior_x=posterior_x,
        posterior_u=posterior_u,
        iteration=iters,
        messages=messages,
        op_counts={"factor_edge_ops": edge_ops},
    )


def lbp_decode(g: FactorGraph, y: TestOutcomes | np.ndarray, iters: int = 20) -> BeliefState:
    """Community-aware decoding: run the message schedule for ``iters`` rounds."""
    outcomes = y.y if isinstance(y, TestOutcomes) else np.asarray(y)
    if len(outcomes) != g.T:
        raise ValueError(f"outcome length {len(outcomes)} != {g.T} tests")
    return _run_lbp(g, outcomes, iters)


def nc_lbp_decode(
    d: TestDesign,
    y: TestOutcomes | np.ndarray,
    p_iid: float,
    z: float,
    iters: int = 20,
) -> np.ndarray:
    """Community-agnostic decoding with an i.i.d. Bernoulli(p_iid) member prior.

    Returns P(U_v = 1) per member.
    """
    if not 0.0 <= p_iid <= 1.0:
        raise ValueError("p_iid must be in [0, 1]")
    tu_test = []
    tu_member = []
    for t, pool in enumerate(d.pools):
        for v in pool:
            tu_test.append(t)
            tu_member.append(int(v))
    g = FactorGraph(
        n=d.n,
        F=0,
        T=d.T,
        me_member=np.zeros(0, dtype=np.intp),
        me_comm=np.zeros(0, dtype=np.intp),
        tu_test=np.asarray(tu_test, dtype=np.intp),
        tu_member=np.asarray(tu_member, dtype=np.intp),
        q=0.0,
        p_edge=np.zeros(0),
        z=float(z),
        prior_u=np.full(d.n, float(p_iid)),
    )
    outcomes = y.y if isinstance(y, TestOutcomes) else np.asarray(y)
    if len(outcomes) != d.T:
        raise ValueError(f"outcome length {len(outcomes)} != {d.T} tests")
    return _run_lbp(g, outcomes, iters).member_marginals()


def harden(beliefs: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Threshold marginals into statuses; the threshold itself rounds up."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    b = np.asarray(beliefs)
    if b.ndim == 2:
        b = b[:, 1]
    return (b >= threshold).astype(np.int8)


def default_p_iid(
    s: CommunityStructure,
    params: InfectionParamsII,
    samples: int = 10_000,
    seed: int | None = 0,
) -> float:
    """Expected infection rate under the probabilistic model, by Monte Carlo."""
    rng = np.random.default_rng(seed)
    X = rng.random((samples, s.num_communities)) < params.q
    p = np.asarray(params.p, dtype=float)
    total = 0.0
    for v in range(s.n):
        idx = np.asarray(s.member_index[v], dtype=np.intp)
        p_not = np.prod(1.0 - X[:, idx] * p[idx], axis=1)
        total += float(np.mean(1.0 - p_not))
    return total / s.n
