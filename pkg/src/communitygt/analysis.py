"""Closed-form error rates and false-negative bound comparisons."""
from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "NoisyCompareParams",
    "error_rate_model2",
    "error_rate_traditional",
    "expected_extra_tests",
    "overlap_conditional_probs",
    "fn_bounds_community",
    "fn_comparison_f",
    "fn_comparison_regime",
    "overlap_fn_mixture",
    "n_10_from_extra_tests",
]


@dataclass(frozen=True)
class NoisyCompareParams:
    """Inputs to the noisy two-stage false-negative bounds.

    ``z_gain`` is the gain factor inside the squared concentration margin and
    is deliberately distinct from the flip probability used by the test
    channel. ``n_10`` counts non-infected communities that share members with
    an infected one.
    """

    F: int
    F_o: int
    M: int
    M_o: int
    k_f: int
    k_m: int
    T1: int
    T2: int
    z_gain: float
    delta: float
    n_10: float

    def __post_init__(self):
        for name in ("F", "F_o", "M", "M_o", "k_f", "k_m", "T1", "T2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.n_10 < 0:
            raise ValueError("n_10 must be nonnegative")

    @property
    def gamma(self) -> float:
        if self.k_f == 0:
            raise ValueError("gamma undefined for k_f = 0")
        return self.n_10 / self.k_f


def error_rate_model2(
    F: int, F_o: int, M: int, M_o: int, q: float, p: float, c: int, n: int
) -> float:
    """Expected false-positive rate of the two-stage block design.

    n must equal the member count implied by (F, F_o, M, M_o).
    """
    expected_n = (F - 2 * F_o) * M + F_o * (2 * M - M_o)
    if n != expected_n:
        raise ValueError(f"n={n} inconsistent with structure (expected {expected_n})")
    n1 = (F - 2 * F_o) * q * (1 - p) * M + 2 * F_o * q * (1 - p) * (M - M_o)
    n2 = F_o * (1 - (1 - q) ** 2) * (1 - p) * M_o
    pq = p * q
    return (
        (1 - (1 - pq) ** (c - 1)) * n1 + (1 - (1 - pq) ** (2 * (c - 1))) * n2
    ) / n


def error_rate_traditional(n: int, k: int, T: int) -> float:
    """Expected false-positive rate of a Bernoulli(1/k) design under plain COMP."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    miss = 1.0 - (1.0 / k) * (1.0 - 1.0 / k) ** k
    return (n - k) * miss ** T / n


def expected_extra_tests(F: int, F_o: int, M: int, k_f: int, z: float) -> float:
    """Expected surplus of second-stage tests paid for ignoring overlaps."""
    if F < 2:
        raise ValueError("need F >= 2")
    if k_f > F:
        raise ValueError("need k_f <= F")
    return (1.0 - z) * F_o * M * k_f * (F - k_f) / (F * (F - 1))


def overlap_conditional_probs(F: int, k_f: int) -> dict:
    """Given an overlapping pair touches the infected set: exactly-one vs both."""
    if F < 2 or not 1 <= k_f <= F:
        raise ValueError(f"need F >= 2 and 1 <= k_f <= F, got F={F}, k_f={k_f}")
    denom = 2 * F - k_f - 1
    return {
        "p_one": 2 * (F - k_f) / denom,
        "p_both": (k_f - 1) / denom,
    }


def fn_bounds_community(p: NoisyCompareParams) -> dict:
    """Chernoff-style false-negative bounds for the two-stage pipeline."""
    denom1 = p.k_f + p.n_10
    if denom1 <= 0:
        raise ValueError("k_f + n_10 must be positive")
    exponent = (p.z_gain * p.delta) ** 2
    q_c1 = math.exp(-2.0 * p.T1 * exponent / denom1)
    k_c2 = q_c1 * p.k_f * p.k_m
    if k_c2 <= 0:
        raise ValueError("second-stage bound undefined: no surviving infected members")
    q_c2 = math.exp(-2.0 * p.T2 * exponent / k_c2)
    return {"Q_c1_bound": q_c1, "Q_c2_bound": q_c2, "k_c2": k_c2}


def fn_comparison_f(gamma: float, u: float, w: float) -> float:
    """f(gamma) = u^((1-gamma)/(1+gamma)) * w^(u^(gamma/(1+gamma)))."""
    if not 0.0 < u < 1.0:
        raise ValueError("u must be in (0, 1)")
    if not 0.0 < w < 1.0:
        raise ValueError("w must be in (0, 1)")
    if gamma < 0.0:
        raise ValueError("gamma must be nonnegative")
    return u ** ((1.0 - gamma) / (1.0 + gamma)) * w ** (u ** (gamma / (1.0 + gamma)))


def fn_comparison_regime(gamma: float, u: float, w: float) -> str:
    """Which side of 1 the comparison ratio falls on."""
    val = fn_comparison_f(gamma, u, w)
    if val < 1.0:
        return "below_one"
    if val > 1.0:
        return "above_one"
    return "at_one"


def overlap_fn_mixture(Q1: float, Q2: float, F: int, k_f: int) -> float:
    """False-negative probability for an overlap member, mixing the
    one-infected and both-infected neighbor cases."""
    for name, val in (("Q1", Q1), ("Q2", Q2)):
        if not 0.0 <= val <= 1.0:
            raise ValueError(f"{name} must be in [0, 1]")
    probs = overlap_conditional_probs(F, k_f)
    return probs["p_one"] * Q1 * Q2 + probs["p_both"] * Q1 * Q1 * Q2


def n_10_from_extra_tests(extra: float, M: int, z: float) -> float:
    """Recover the non-infected-neighbor count from the expected test surplus."""
    if z >= 1.0:
        raise ValueError("z must be below 1")
    if M < 1:
        raise ValueError("M must be positive")
    return extra / ((1.0 - z) * M)
