"""Command-line experiment runner.

Subcommands:
  lp-solve       solve the request-policy LP; write solution + summary
  verify-single  exact-oracle and simulation agreement report
  simulate       fleet sweep over r values; CSV metrics + scaling fit

Exit codes: 0 ok, 2 configuration error, 3 infeasible LP, 4 invariant
breach during simulation.
"""

import argparse
import json
import math
import sys
from pathlib import Path

from . import __version__, experiment
from ._backend import BACKEND_NAME
from .errors import ConfigError, InvariantBreachError, LpInfeasibleError
from .lp import required_servers, solution_to_json

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_BREACH = 4


def _load(path: str) -> experiment.ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    return experiment.load_config(data)


def _write_common(outdir: Path, cfg, seed_override):
    outdir.mkdir(parents=True, exist_ok=True)
    resolved = dict(cfg.resolved)
    if seed_override is not None:
        resolved["master_seed"] = seed_override
    resolved["input_hash"] = cfg.content_hash
    resolved["package_version"] = __version__
    resolved["backend"] = BACKEND_NAME
    with open(outdir / "resolved_config.json", "w") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_lp_solve(cfg, outdir: Path) -> int:
    problem, sol, pol, dec, oracles = experiment.solve_pipeline(cfg)
    with open(outdir / "lp_solution.json", "w") as fh:
        fh.write(solution_to_json(sol, cfg.space))
        fh.write("\n")
    summary = {
        "phi": sol.phi,
        "residuals": sol.residuals,
        "num_classes": dec.num_classes,
        "servers_needed": {
            f"{r:g}": {
                "nbar": required_servers(sol.phi, r),
                "pool_sizes": [
                    math.ceil(w * required_servers(sol.phi, r))
                    for w in dec.weights
                ],
            }
            for r in cfg.r_values
        },
    }
    with open(outdir / "lp_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print(f"phi* = {sol.phi:.12g}  (residuals {sol.residuals:.2e})")
    for r in cfg.r_values:
        print(f"  r = {r:g}: servers needed = {required_servers(sol.phi, r):.6g}")
    return EXIT_OK


def cmd_verify_single(cfg, outdir: Path) -> int:
    problem, sol, pol, dec, oracles = experiment.solve_pipeline(cfg)
    report = experiment.verify_report(cfg, sol, pol, dec, oracles)
    with open(outdir / "verify_report.json", "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    print(
        f"phi* = {report['phi']:.12g}, {report['num_classes']} recurrent "
        f"class(es), stationary residual {report['stationary_residual']:.2e}"
    )
    for j, entry in enumerate(report["classes"]):
        sim = entry["simulation"]
        print(
            f"  class {j}: weight {entry['weight']:.6g}, "
            f"TV(oracle, LP) {entry['tv_oracle_vs_lp']:.2e}, "
            f"sim max z: pi {sim['max_pi_z']:.2f} freq {sim['max_freq_z']:.2f}"
        )
    return EXIT_OK


def cmd_simulate(cfg, outdir: Path, workers: int, trace: bool) -> int:
    problem, sol, pol, dec, oracles = experiment.solve_pipeline(cfg)
    trace_dir = outdir if trace else None
    rows, summaries, fit, p_busy = experiment.run_sweep(
        cfg, sol, dec, oracles, workers=workers, trace_dir=trace_dir
    )
    csv_text = experiment.format_csv(rows, cfg.space.num_phases)
    with open(outdir / "metrics.csv", "w") as fh:
        fh.write(csv_text)
    if fit is not None:
        payload = fit.to_json_dict()
        payload["p_busy"] = p_busy
        with open(outdir / "scaling_fit.json", "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        print(
            f"gap scaling: slope {fit.slope:.4f} "
            f"(± {fit.slope_half_width:.4f}), intercept {fit.intercept:.4f}"
        )
    if cfg.baselines:
        base_rows = experiment.run_baselines(cfg, workers=workers)
        lines = ["strategy,r,active,cost_per_active"]
        for strategy, r, est, merged in base_rows:
            cpa = est["cost_per_active"]
            lines.append(
                f"{strategy},{r:.12g},{est['active'].value:.12g},"
                f"{(cpa.value if cpa else float('nan')):.12g}"
            )
        with open(outdir / "baselines.csv", "w") as fh:
            fh.write("\n".join(lines) + "\n")
    for r, est, merged in summaries:
        print(
            f"  r = {r:g}: active {est['active'].value:.4f} "
            f"(± {est['active'].half_width:.4f}), "
            f"cost/active {est['cost_per_active'].value if est['cost_per_active'] else float('nan'):.5f}"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="packsim",
        description="Stochastic bin-packing of phase-varying jobs: LP, "
        "policy verification, and fleet simulation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("lp-solve", "solve the request-policy LP"),
        ("verify-single", "verify the policy against the exact oracle"),
        ("simulate", "run the fleet simulation sweep"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment JSON file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the master seed")
        if name == "simulate":
            p.add_argument("--workers", type=int, default=1,
                           help="parallel replication workers")
            p.add_argument("--trace", action="store_true",
                           help="write per-run event traces")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args.config)
        if args.seed is not None:
            cfg.master_seed = args.seed
            cfg.resolved["master_seed"] = args.seed
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        _write_common(outdir, cfg, args.seed)
        if args.command == "lp-solve":
            return cmd_lp_solve(cfg, outdir)
        if args.command == "verify-single":
            return cmd_verify_single(cfg, outdir)
        return cmd_simulate(
            cfg, outdir, workers=max(1, args.workers),
            trace=args.trace,
        )
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LpInfeasibleError as exc:
        print(f"infeasible LP: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except InvariantBreachError as exc:
        print(f"invariant breach: {exc}", file=sys.stderr)
        return EXIT_BREACH
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
