"""Command-line entry points for structure generation, bounds, simulation,
decoding, and formula evaluation."""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import analysis as analysis_mod
from .bounds import combinatorial_bound, counting_bound, probabilistic_bound
from .harness import (
    ConfigError,
    ExperimentConfig,
    run_adaptive_experiment,
    run_formula_validation,
    run_nonadaptive_experiment,
)
from .infection import InfectionParamsII, state_from_dict
from .lbp import build_factor_graph, lbp_decode, nc_lbp_decode
from .structure import (
    StructureError,
    load_structure,
    pairwise_overlap_structure,
    random_structure,
    save_structure,
)
from .testing import load_design, outcomes_from_dict

EXIT_CONFIG_ERROR = 2


def _load_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _cmd_gen_structure(args) -> int:
    if args.pairwise:
        F, F_o, M, M_o = args.pairwise
        s = pairwise_overlap_structure(F=F, F_o=F_o, M=M, M_o=M_o)
    else:
        s = random_structure(
            target_F=args.target_F,
            size_range=(args.size_range[0], args.size_range[1]),
            max_degree=args.max_degree,
            degree_p=args.degree_p,
            seed=args.seed,
        )
    save_structure(s, args.out)
    print(f"wrote structure with n={s.n}, F={s.num_communities} to {args.out}")
    return 0


def _cmd_bounds(args) -> int:
    report = {}
    if args.counting:
        n, k = args.counting
        report["counting"] = counting_bound(n, k)
    if args.structure and args.state:
        s = load_structure(args.structure)
        state = state_from_dict(_load_json(args.state))
        report["combinatorial"] = combinatorial_bound(s, state).to_dict()
    if args.structure and args.q is not None:
        s = load_structure(args.structure)
        p = np.full(s.num_communities, args.p)
        rep = probabilistic_bound(
            s,
            InfectionParamsII(q=args.q, p=p),
            exact_max_component=args.exact_max_component,
            mc_samples=args.mc_samples,
            seed=args.seed,
        )
        report["probabilistic"] = rep.to_dict()
    if not report:
        raise ConfigError("nothing to compute: pass --counting and/or --structure")
    print(json.dumps(report, indent=2))
    return 0


def _experiment_config(args, kind: str) -> ExperimentConfig:
    cfg_dict = _load_json(args.config) if args.config else {}
    cfg_dict["kind"] = kind
    if args.out:
        cfg_dict["output"] = args.out
    for name in ("trials", "seed", "z", "workers"):
        val = getattr(args, name, None)
        if val is not None:
            cfg_dict[name] = val
    if getattr(args, "structure", None):
        cfg_dict["structure"] = {"kind": "file", "path": args.structure}
    if getattr(args, "theta", None) is not None:
        cfg_dict["theta_grid"] = [args.theta]
    if getattr(args, "T", None):
        cfg_dict["t_grid"] = args.T
    return ExperimentConfig.from_dict(cfg_dict)


def _cmd_sim_adaptive(args) -> int:
    cfg = _experiment_config(args, "adaptive")
    rows = run_adaptive_experiment(cfg)
    if not cfg.output:
        for row in rows:
            print(",".join("" if v is None else str(v) for v in row))
    else:
        print(f"wrote {len(rows)} rows to {cfg.output}")
    return 0


def _cmd_sim_nonadaptive(args) -> int:
    cfg = _experiment_config(args, "nonadaptive")
    rows = run_nonadaptive_experiment(cfg)
    if not cfg.output:
        for row in rows:
            print(",".join("" if v is None else str(v) for v in row))
    else:
        print(f"wrote {len(rows)} rows to {cfg.output}")
    return 0


def _cmd_decode_lbp(args) -> int:
    d = load_design(args.design)
    y = outcomes_from_dict(_load_json(args.y))
    if args.structure:
        s = load_structure(args.structure)
        p = np.full(s.num_communities, args.p)
        g = build_factor_graph(s, d, InfectionParamsII(q=args.q, p=p), z=args.z)
        beliefs = lbp_decode(g, y, iters=args.iters)
        out = {
            "member_posteriors": beliefs.member_marginals().tolist(),
            "community_posteriors": beliefs.posterior_x[:, 1].tolist(),
            "iterations": beliefs.iteration,
        }
    else:
        marginals = nc_lbp_decode(d, y, p_iid=args.p_iid, z=args.z, iters=args.iters)
        out = {"member_posteriors": marginals.tolist()}
    print(json.dumps(out))
    return 0


_FORMULAS = {
    "error_rate_model2": analysis_mod.error_rate_model2,
    "error_rate_traditional": analysis_mod.error_rate_traditional,
    "expected_extra_tests": analysis_mod.expected_extra_tests,
    "overlap_conditional_probs": analysis_mod.overlap_conditional_probs,
    "fn_comparison_f": analysis_mod.fn_comparison_f,
    "overlap_fn_mixture": analysis_mod.overlap_fn_mixture,
}


def _cmd_analysis(args) -> int:
    params = _load_json(args.params)
    if args.formula == "fn_bounds_community":
        result = analysis_mod.fn_bounds_community(
            analysis_mod.NoisyCompareParams(**params)
        )
    else:
        fn = _FORMULAS.get(args.formula)
        if fn is None:
            raise ConfigError(f"unknown formula: {args.formula!r}")
        sweep = params.pop("sweep", None)
        if sweep:
            axis, values = sweep["param"], sweep["values"]
            print(f"{axis},value")
            for v in values:
                print(f"{v},{fn(**{**params, axis: v}):.10g}")
            return 0
        result = fn(**params)
    print(json.dumps(result))
    return 0


def _cmd_validate_formulas(args) -> int:
    cfg_dict = _load_json(args.config)
    cfg_dict["kind"] = "formula_validation"
    if args.out:
        cfg_dict["output"] = args.out
    if args.seed is not None:
        cfg_dict["seed"] = args.seed
    cfg = ExperimentConfig.from_dict(cfg_dict)
    rows = run_formula_validation(cfg)
    if cfg.output:
        print(f"wrote {len(rows)} rows to {cfg.output}")
    else:
        for row in rows:
            print(",".join(str(v) for v in row))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="communitygt",
        description="Group testing simulator for overlapping communities.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-structure", help="generate and save a structure")
    p.add_argument("--target-F", type=int, default=20, dest="target_F")
    p.add_argument("--size-range", type=int, nargs=2, default=[15, 25])
    p.add_argument("--max-degree", type=int, default=4)
    p.add_argument("--degree-p", type=float, default=0.5)
    p.add_argument("--pairwise", type=int, nargs=4, metavar=("F", "F_O", "M", "M_O"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_structure)

    p = sub.add_parser("bounds", help="evaluate lower bounds")
    p.add_argument("--counting", type=int, nargs=2, metavar=("N", "K"))
    p.add_argument("--structure")
    p.add_argument("--state")
    p.add_argument("--q", type=float)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--exact-max-component", type=int, default=20)
    p.add_argument("--mc-samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("sim-adaptive", help="run adaptive-algorithm trials")
    p.add_argument("--config")
    p.add_argument("--structure")
    p.add_argument("--theta", type=float)
    p.add_argument("--z", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sim_adaptive)

    p = sub.add_parser("sim-nonadaptive", help="run non-adaptive design trials")
    p.add_argument("--config")
    p.add_argument("--structure")
    p.add_argument("--T", type=int, nargs="+")
    p.add_argument("--z", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sim_nonadaptive)

    p = sub.add_parser("decode-lbp", help="posterior marginals for one instance")
    p.add_argument("--design", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--structure")
    p.add_argument("--q", type=float, default=0.05)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--p-iid", type=float, default=0.05, dest="p_iid")
    p.add_argument("--z", type=float, default=0.0)
    p.add_argument("--iters", type=int, default=20)
    p.set_defaults(func=_cmd_decode_lbp)

    p = sub.add_parser("analysis", help="evaluate a closed-form formula")
    p.add_argument("--formula", required=True)
    p.add_argument("--params", required=True, help="JSON parameter file")
    p.set_defaults(func=_cmd_analysis)

    p = sub.add_parser("validate-formulas", help="formula-vs-simulation sweeps")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_validate_formulas)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, StructureError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
