"""Command-line frontend.

One self-describing JSON config per run; subcommands solve (fixed-point
curve + verdict), minsum (series classifier), simulate (empirical explosion
times), compare (forward vs backward domination) and survival (long-run
explosion probability).

Exit codes: 0 success, 1 config error, 2 solver did not converge (result
still written), 3 domination violated (a theorem-violation diagnostic).
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .config import ConfigError, RunConfig, load_config, resolved_config_dict
from .fpe import (
    TimeGrid,
    Verdict,
    explosion_verdict,
    iterate_phi,
    phi_table_to_csv,
    survival_probability,
)
from .minsum import alpha_invariance_scan, classify_minsum
from .process import (
    BackwardContagiousProcess,
    BackwardIncubationProcess,
    ClassicalProcess,
    ForwardContagiousProcess,
    ForwardIncubationProcess,
)
from .sim import SimConfig, domination_test, empirical_explosion_time, empirical_to_csv

__all__ = ["main"]


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bpexplosion",
        description="Explosiveness analysis for age-dependent branching processes",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("solve", "solve the fixed-point equation and classify explosiveness"),
        ("minsum", "run the min-summability series classifier"),
        ("simulate", "Monte Carlo explosion-time proxies"),
        ("compare", "forward vs backward explosion-time domination test"),
        ("survival", "long-run explosion probability"),
    ):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--out", default=None, help="output path (overrides config)")
        p.add_argument("--format", default=None, choices=("csv", "json"))
        p.add_argument("--seed", default=None, type=int, help="master seed override")
        p.add_argument("--quiet", action="store_true")
    return parser


def _say(args, msg: str):
    if not args.quiet:
        print(msg)


def _write_json(path: str, payload: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_path(cfg: RunConfig, default_ext: str) -> str:
    path = cfg.output["path"]
    if "." not in path.rsplit("/", 1)[-1]:
        path = f"{path}.{default_ext}"
    return path


def _cmd_solve(cfg: RunConfig, args) -> int:
    grid = TimeGrid(dt=float(cfg.grid["dt"]), horizon=float(cfg.grid["horizon"]))
    phi = iterate_phi(
        cfg.process,
        grid,
        max_iters=int(cfg.solver["max_iters"]),
        tol=float(cfg.solver["tol"]),
    )
    verdict = explosion_verdict(phi, threshold=float(cfg.solver["threshold"]))
    deficit = float(1.0 - phi.values[-1])
    if cfg.output["format"] == "csv":
        path = _out_path(cfg, "csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(phi_table_to_csv(phi))
    else:
        path = _out_path(cfg, "json")
        _write_json(
            path,
            {
                "command": "solve",
                "config": resolved_config_dict(cfg),
                "verdict": verdict.value,
                "one_minus_phi_at_horizon": deficit,
                "iterations_used": phi.iterations_used,
                "sup_residual": phi.sup_residual,
                "converged": phi.converged,
                "t": phi.grid.points.tolist(),
                "phi": phi.values.tolist(),
            },
        )
    _say(args, f"solve: verdict={verdict.value} 1-phi(T)={deficit:.6g} "
               f"iters={phi.iterations_used} -> {path}")
    return 0 if phi.converged else 2


def _cmd_minsum(cfg: RunConfig, args) -> int:
    spec = cfg.process
    if not isinstance(spec, ClassicalProcess):
        raise ConfigError("process: minsum classification needs a classical spec")
    m0 = cfg.minsum["m0_override"]
    report = classify_minsum(
        spec.offspring,
        spec.lifetime,
        n_terms=int(cfg.minsum["N"]),
        m0_override=None if m0 is None else int(m0),
    )
    path = _out_path(cfg, "json")
    _write_json(
        path,
        {
            "command": "minsum",
            "config": resolved_config_dict(cfg),
            **report.to_dict(),
        },
    )
    _say(args, f"minsum: verdict={report.verdict.value} method={report.method.value} -> {path}")
    return 0


def _cmd_simulate(cfg: RunConfig, args) -> int:
    sim_cfg = SimConfig(
        process=cfg.process,
        horizon=float(cfg.grid["horizon"]),
        cap=int(cfg.sim["cap"]),
        trials=int(cfg.sim["trials"]),
        master_seed=int(cfg.sim["master_seed"]),
    )
    dist = empirical_explosion_time(sim_cfg)
    if cfg.output["format"] == "csv":
        path = _out_path(cfg, "csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(empirical_to_csv(dist))
    else:
        path = _out_path(cfg, "json")
        _write_json(
            path,
            {
                "command": "simulate",
                "config": resolved_config_dict(cfg),
                "proxy_times": dist.times.tolist(),
                "censored": dist.censored,
                "trials": dist.trials,
            },
        )
    frac = 1.0 - dist.censored / dist.trials
    _say(args, f"simulate: {dist.trials} trials, exploded fraction {frac:.3f} -> {path}")
    return 0


def _backward_twin(spec):
    if isinstance(spec, ForwardContagiousProcess):
        return BackwardContagiousProcess(spec.offspring, spec.lifetime, spec.contagious)
    if isinstance(spec, ForwardIncubationProcess):
        return BackwardIncubationProcess(spec.offspring, spec.lifetime, spec.incubation)
    raise ConfigError(
        "process: compare needs a forward_contagious or forward_incubation spec "
        "(the backward twin is derived from it)"
    )


def _cmd_compare(cfg: RunConfig, args) -> int:
    forward = cfg.process
    backward = _backward_twin(forward)
    master = int(cfg.sim["master_seed"])
    seeds = np.random.SeedSequence(master & 0xFFFFFFFFFFFFFFFF).generate_state(2)
    common = dict(
        horizon=float(cfg.grid["horizon"]),
        cap=int(cfg.sim["cap"]),
        trials=int(cfg.sim["trials"]),
    )
    dist_f = empirical_explosion_time(
        SimConfig(process=forward, master_seed=int(seeds[0]), **common)
    )
    dist_b = empirical_explosion_time(
        SimConfig(process=backward, master_seed=int(seeds[1]), **common)
    )
    report = domination_test(lower=dist_b, upper=dist_f)
    path = _out_path(cfg, "json")
    _write_json(
        path,
        {
            "command": "compare",
            "config": resolved_config_dict(cfg),
            "violated": report.violated,
            "max_gap": report.max_gap,
            "critical_value": report.critical_value,
            "level": report.level,
            "forward": {"censored": dist_f.censored, "trials": dist_f.trials},
            "backward": {"censored": dist_b.censored, "trials": dist_b.trials},
        },
    )
    _say(args, f"compare: violated={report.violated} gap={report.max_gap:.4f} "
               f"critical={report.critical_value:.4f} -> {path}")
    return 3 if report.violated else 0


def _cmd_survival(cfg: RunConfig, args) -> int:
    report = survival_probability(cfg.process)
    path = _out_path(cfg, "json")
    _write_json(
        path,
        {
            "command": "survival",
            "config": resolved_config_dict(cfg),
            "eta_infinity": report.eta_infinity,
            "extinction_q": report.extinction_q,
            "fixed_point_residual": report.fixed_point_residual,
        },
    )
    _say(args, f"survival: eta_infinity={report.eta_infinity:.9f} -> {path}")
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "minsum": _cmd_minsum,
    "simulate": _cmd_simulate,
    "compare": _cmd_compare,
    "survival": _cmd_survival,
}


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(
            args.config,
            seed_override=args.seed,
            out_override=args.out,
            format_override=args.format,
        )
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
