"""Experiment orchestration: seeded Monte-Carlo sweeps written to CSV.

Every run is a pure function of (config, master seed). Per-task seeds are
derived by hashing, rows are sorted deterministically before writing, and
floats use a fixed format, so serial and parallel runs emit identical bytes.
"""
from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import adaptive as adaptive_mod
from . import nonadaptive as na
from .bounds import combinatorial_bound, counting_bound
from .infection import InfectionParamsII, InfectionState, sample_probabilistic
from .lbp import build_factor_graph, default_p_iid, harden, lbp_decode, nc_lbp_decode
from .structure import (
    CommunityStructure,
    load_structure,
    pairwise_overlap_structure,
    random_structure,
)
from .testing import TestOracle, run_design

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "derive_seed",
    "config_hash",
    "write_csv",
    "run_adaptive_experiment",
    "run_nonadaptive_experiment",
    "run_formula_validation",
]

ADAPTIVE_ALGORITHMS = ("binary_splitting", "baseline", "adaptive")
NONADAPTIVE_PIPELINES = ("g1g2+comp", "ccw+comp", "ccw+nc-lbp", "ccw+c-lbp")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    kind: str
    structure: dict = field(default_factory=dict)
    num_structures: int = 1
    infection: dict = field(default_factory=dict)
    algorithms: list = field(default_factory=lambda: list(ADAPTIVE_ALGORITHMS))
    pipelines: list = field(default_factory=lambda: list(NONADAPTIVE_PIPELINES))
    theta_grid: list = field(default_factory=lambda: [0.5])
    t_grid: list = field(default_factory=list)
    c_grid: list = field(default_factory=list)
    alpha_grid: list = field(default_factory=lambda: [round(0.1 * i, 1) for i in range(1, 11)])
    trials: int = 10
    seed: int = 0
    z: float = 0.0
    lbp_iters: int = 20
    output: str | None = None
    record_wall_time: bool = False
    workers: int | None = None

    def __post_init__(self):
        if self.kind not in ("adaptive", "nonadaptive", "formula_validation"):
            raise ConfigError(f"unknown experiment kind: {self.kind!r}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.num_structures < 1:
            raise ConfigError("num_structures must be at least 1")
        if not 0.0 <= self.z < 1.0:
            raise ConfigError("z must be in [0, 1)")
        if self.kind == "adaptive" and not self.theta_grid:
            raise ConfigError("theta_grid must be non-empty")
        if self.kind == "nonadaptive" and not self.t_grid:
            raise ConfigError("t_grid must be non-empty")
        if self.kind == "nonadaptive" and not self.alpha_grid:
            raise ConfigError("alpha_grid must be non-empty")
        unknown = set(self.algorithms) - set(ADAPTIVE_ALGORITHMS)
        if unknown:
            raise ConfigError(f"unknown algorithms: {sorted(unknown)}")
        unknown = set(self.pipelines) - set(NONADAPTIVE_PIPELINES)
        if unknown:
            raise ConfigError(f"unknown pipelines: {sorted(unknown)}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        allowed = set(cls.__dataclass_fields__)
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return {
            name: getattr(self, name) for name in self.__dataclass_fields__
        }


def derive_seed(master: int, *parts) -> int:
    """Stable per-task seed from the master seed and task coordinates."""
    key = "|".join([str(master), *(str(p) for p in parts)])
    digest = hashlib.sha256(key.encode()).digest()
    return int.from_bytes(digest[:8], "big")


def config_hash(cfg: ExperimentConfig) -> str:
    d = cfg.to_dict()
    # execution details must not change the hash: parallel and serial runs of
    # the same experiment have to emit identical bytes
    d.pop("workers")
    d.pop("output")
    canonical = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def write_csv(path: str, header: list[str], rows: list[tuple], cfg_hash: str) -> None:
    lines = [f"# config_hash={cfg_hash}", ",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _workers(cfg: ExperimentConfig) -> int:
    if cfg.workers is not None:
        return max(1, int(cfg.workers))
    env = os.environ.get("COMMUNITYGT_WORKERS")
    return max(1, int(env)) if env else 1


def _map_tasks(fn, args_list, workers: int):
    if workers <= 1 or len(args_list) <= 1:
        return [fn(a) for a in args_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, args_list))


def _make_structure(cfg_structure: dict, seed: int) -> CommunityStructure:
    kind = cfg_structure.get("kind", "random")
    if kind == "file":
        return load_structure(cfg_structure["path"])
    if kind == "pairwise":
        return pairwise_overlap_structure(
            F=cfg_structure["F"],
            F_o=cfg_structure["F_o"],
            M=cfg_structure["M"],
            M_o=cfg_structure["M_o"],
        )
    if kind == "random":
        return random_structure(
            target_F=cfg_structure.get("target_F", 20),
            size_range=tuple(cfg_structure.get("size_range", [15, 25])),
            max_degree=cfg_structure.get("max_degree", 4),
            degree_p=cfg_structure.get("degree_p", 0.5),
            seed=seed,
        )
    raise ConfigError(f"unknown structure kind: {kind!r}")


def _sample_state(
    s: CommunityStructure, infection: dict, seed: int
) -> tuple[InfectionState, InfectionParamsII]:
    model = infection.get("model", "probabilistic")
    if model != "probabilistic":
        raise ConfigError(f"unsupported infection model for experiments: {model!r}")
    q = infection.get("q", 0.05)
    rng = np.random.default_rng(derive_seed(seed, "rates"))
    if "p" in infection:
        p = np.full(s.num_communities, float(infection["p"]))
    else:
        lo, hi = infection.get("p_range", [0.3, 0.9])
        p = rng.uniform(lo, hi, size=s.num_communities)
    params = InfectionParamsII(q=q, p=p)
    return sample_probabilistic(s, params, seed=derive_seed(seed, "state")), params


def _error_counts(estimates: np.ndarray, truth: np.ndarray) -> tuple[int, int]:
    est = np.asarray(estimates).astype(bool)
    tru = np.asarray(truth).astype(bool)
    fn = int(np.count_nonzero(~est & tru))
    fp = int(np.count_nonzero(est & ~tru))
    return fn, fp


ADAPTIVE_HEADER = [
    "experiment",
    "structure_id",
    "trial",
    "algorithm",
    "sweep_value",
    "tests_used",
    "fn_count",
    "fp_count",
    "counting_bound",
    "combinatorial_bound",
    "wall_time",
]


def _adaptive_structure_task(args) -> list[tuple]:
    cfg_dict, sid = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    s = _make_structure(cfg.structure, derive_seed(cfg.seed, "structure", sid))
    rows = []
    for trial in range(cfg.trials):
        state, _ = _sample_state(s, cfg.infection, derive_seed(cfg.seed, sid, trial))
        k = int(state.member_status.sum())
        cbound = counting_bound(s.n, k)
        combo = combinatorial_bound(s, state).value
        for algo in cfg.algorithms:
            thetas = cfg.theta_grid if algo == "adaptive" else [cfg.theta_grid[0]]
            for theta in thetas:
                oracle_seed = derive_seed(cfg.seed, sid, trial, algo, theta)
                oracle = TestOracle(state, z=cfg.z, seed=oracle_seed)
                t0 = time.perf_counter()
                if algo == "binary_splitting":
                    statuses = adaptive_mod.binary_splitting(range(s.n), oracle)
                    est = np.zeros(s.n, dtype=np.int8)
                    for v, r in statuses.items():
                        est[v] = r
                    tests = oracle.tests_used
                elif algo == "baseline":
                    res = adaptive_mod.nonoverlapping_baseline(s, oracle, seed=oracle_seed)
                    est, tests = res.estimates, res.tests_used
                else:
                    res = adaptive_mod.adaptive_community_test(
                        s, oracle, theta=theta, seed=oracle_seed
                    )
                    est, tests = res.estimates, res.tests_used
                elapsed = time.perf_counter() - t0
                fn, fp = _error_counts(est, state.member_status)
                rows.append(
                    (
                        "adaptive",
                        sid,
                        trial,
                        algo,
                        theta,
                        tests,
                        fn,
                        fp,
                        cbound,
                        combo,
                        elapsed if cfg.record_wall_time else None,
                    )
                )
    return rows


def run_adaptive_experiment(cfg: ExperimentConfig) -> list[tuple]:
    if cfg.kind != "adaptive":
        raise ConfigError("config kind must be 'adaptive'")
    tasks = [(cfg.to_dict(), sid) for sid in range(cfg.num_structures)]
    chunks = _map_tasks(_adaptive_structure_task, tasks, _workers(cfg))
    rows = sorted(
        (r for chunk in chunks for r in chunk),
        key=lambda r: (r[1], r[2], r[3], r[4]),
    )
    if cfg.output:
        write_csv(cfg.output, ADAPTIVE_HEADER, rows, config_hash(cfg))
    return rows


NONADAPTIVE_HEADER = [
    "experiment",
    "structure_id",
    "trial",
    "design",
    "decoder",
    "T",
    "alpha",
    "fn_count",
    "fp_count",
    "n",
    "k",
    "wall_time",
]


def _g1g2_design(s: CommunityStructure, T: int, cache: dict):
    if "g1" not in cache:
        cache["g1"] = na.build_g1(s, mode="one_per_outer")
    g1 = cache["g1"]
    T2 = T - g1.T
    if T2 < 1:
        return None
    c = max(1, -(-s.n // T2))
    if ("g2", c) not in cache:
        cache[("g2", c)] = na.build_g2_general(s, c)
    return g1, cache[("g2", c)]


def _nonadaptive_structure_task(args) -> list[tuple]:
    cfg_dict, sid = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    s = _make_structure(cfg.structure, derive_seed(cfg.seed, "structure", sid))
    rows = []
    design_cache: dict = {}
    # one shared infection-rate draw per (structure, trial); designs reuse it
    for trial in range(cfg.trials):
        state, params = _sample_state(
            s, cfg.infection, derive_seed(cfg.seed, sid, trial)
        )
        truth = state.member_status
        k = int(truth.sum())
        p_iid = default_p_iid(s, params, seed=derive_seed(cfg.seed, sid, "p_iid"))
        k_hat = max(1, round(p_iid * s.n))
        for T in cfg.t_grid:
            g1g2 = _g1g2_design(s, T, design_cache) if "g1g2+comp" in cfg.pipelines else None
            if g1g2 is not None:
                g1, g2 = g1g2
                y1 = run_design(g1, state, z=cfg.z, seed=derive_seed(cfg.seed, sid, trial, T, "g1"))
                y2 = run_design(g2, state, z=cfg.z, seed=derive_seed(cfg.seed, sid, trial, T, "g2"))
                est = na.community_comp_decode(g1, g2, y1, y2, s)
                fn, fp = _error_counts(est, truth)
                rows.append(("nonadaptive", sid, trial, "g1g2", "comp", T, None, fn, fp, s.n, k, None))
            ccw_pipes = [p for p in cfg.pipelines if p.startswith("ccw+")]
            if not ccw_pipes:
                continue
            # one row per alpha; best-alpha selection happens at aggregation time
            for alpha in cfg.alpha_grid:
                w = max(1, min(T, round(alpha * T / k_hat)))
                d = na.build_ccw(
                    s.n, T, w, seed=derive_seed(cfg.seed, sid, trial, T, "ccw", alpha)
                )
                y = run_design(d, state, z=cfg.z, seed=derive_seed(cfg.seed, sid, trial, T, "y", alpha))
                for pipe in ccw_pipes:
                    decoder = pipe.split("+", 1)[1]
                    if decoder == "comp":
                        est = na.comp_decode(d, y)
                    elif decoder == "nc-lbp":
                        beliefs = nc_lbp_decode(d, y, p_iid=p_iid, z=cfg.z, iters=cfg.lbp_iters)
                        est = harden(beliefs)
                    else:
                        g = build_factor_graph(s, d, params, z=cfg.z)
                        est = harden(lbp_decode(g, y, iters=cfg.lbp_iters).member_marginals())
                    fn, fp = _error_counts(est, truth)
                    rows.append(("nonadaptive", sid, trial, "ccw", decoder, T, alpha, fn, fp, s.n, k, None))
    return rows


def run_nonadaptive_experiment(cfg: ExperimentConfig) -> list[tuple]:
    if cfg.kind != "nonadaptive":
        raise ConfigError("config kind must be 'nonadaptive'")
    tasks = [(cfg.to_dict(), sid) for sid in range(cfg.num_structures)]
    chunks = _map_tasks(_nonadaptive_structure_task, tasks, _workers(cfg))
    rows = sorted(
        (r for chunk in chunks for r in chunk),
        key=lambda r: (r[1], r[2], r[5], r[3], r[4], -1.0 if r[6] is None else r[6]),
    )
    if cfg.output:
        write_csv(cfg.output, NONADAPTIVE_HEADER, rows, config_hash(cfg))
    return rows


VALIDATION_HEADER = [
    "formula",
    "sweep",
    "formula_value",
    "empirical_mean",
    "std_error",
    "trials",
]


def _simulate_block_error_rate(
    F: int, F_o: int, M: int, M_o: int, q: float, p: float, c: int,
    trials: int, seed: int,
) -> np.ndarray:
    """Per-trial false-positive rates of the block pipeline.

    The first stage is taken error-free (clearing is driven by the true
    community statuses); the second stage runs the block design with COMP.
    """
    s = pairwise_overlap_structure(F=F, F_o=F_o, M=M, M_o=M_o)
    g2 = na.build_g2_example(F, F_o, M, M_o, c, allow_partial=True)
    params = InfectionParamsII(q=q, p=np.full(F, p))
    rates = np.zeros(trials)
    comm_of = s.member_index
    for t in range(trials):
        state = sample_probabilistic(s, params, seed=derive_seed(seed, "m2", c, t))
        y2 = run_design(g2, state, z=0.0, seed=None)
        est = na.comp_decode(g2, y2)
        X = state.community_status
        for v in range(s.n):
            if not any(X[e] for e in comm_of[v]):
                est[v] = 0
        _, fp = _error_counts(est, state.member_status)
        rates[t] = fp / s.n
    return rates


def _simulate_traditional_error_rate(
    n: int, k: int, T: int, trials: int, seed: int
) -> np.ndarray:
    rates = np.zeros(trials)
    for t in range(trials):
        rng = np.random.default_rng(derive_seed(seed, "trad", T, t))
        truth = np.zeros(n, dtype=np.int8)
        truth[rng.choice(n, size=k, replace=False)] = 1
        mask = rng.random((T, n)) < 1.0 / k
        y = (mask & truth.astype(bool)).any(axis=1).astype(np.uint8)
        est = np.ones(n, dtype=np.int8)
        for row in range(T):
            if not y[row]:
                est[mask[row]] = 0
        fp = int(np.count_nonzero((est == 1) & (truth == 0)))
        rates[t] = fp / n
    return rates


def run_formula_validation(cfg: ExperimentConfig) -> list[tuple]:
    if cfg.kind != "formula_validation":
        raise ConfigError("config kind must be 'formula_validation'")
    from .analysis import error_rate_model2, error_rate_traditional

    inf = cfg.infection
    rows = []
    if cfg.c_grid:
        st = cfg.structure
        for key in ("F", "F_o", "M", "M_o"):
            if key not in st:
                raise ConfigError(f"structure parameter {key} required")
        F, F_o, M, M_o = st["F"], st["F_o"], st["M"], st["M_o"]
        q, p = inf.get("q", 0.2), inf.get("p", 0.2)
        n = (F - 2 * F_o) * M + F_o * (2 * M - M_o)
        for c in cfg.c_grid:
            formula = error_rate_model2(F, F_o, M, M_o, q, p, c, n)
            rates = _simulate_block_error_rate(
                F, F_o, M, M_o, q, p, c, cfg.trials, cfg.seed
            )
            se = float(rates.std(ddof=1) / np.sqrt(cfg.trials)) if cfg.trials > 1 else 0.0
            rows.append(("model2", c, formula, float(rates.mean()), se, cfg.trials))
    if cfg.t_grid:
        n = cfg.structure.get("n")
        k = inf.get("k")
        if n is None or k is None:
            raise ConfigError("traditional validation needs structure.n and infection.k")
        for T in cfg.t_grid:
            formula = error_rate_traditional(n, k, T)
            rates = _simulate_traditional_error_rate(n, k, T, cfg.trials, cfg.seed)
            se = float(rates.std(ddof=1) / np.sqrt(cfg.trials)) if cfg.trials > 1 else 0.0
            rows.append(("traditional", T, formula, float(rates.mean()), se, cfg.trials))
    if not rows:
        raise ConfigError("formula_validation needs c_grid and/or t_grid")
    if cfg.output:
        write_csv(cfg.output, VALIDATION_HEADER, rows, config_hash(cfg))
    return rows
