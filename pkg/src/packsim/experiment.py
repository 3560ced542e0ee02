"""Experiment configuration and orchestration.

A JSON experiment file describes the job model, the configuration space,
the cost budget, and the simulation protocol.  The same resolved
configuration plus master seed always reproduces byte-identical outputs;
replications are dispatched to a process pool and reassembled in a fixed
order before anything is written.
"""

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import fleet, metrics, oracle, policy, single_sim
from .configs import ConfigSpace, CostFn, enumerate_space, make_cost_fn, overcommit_cost, tightest_lipschitz
from .errors import ConfigError
from .jobs import JobModel
from .lp import assemble_lp, required_servers, solve_lp, stationary_residual
from .rng import derive_seed


@dataclass
class ExperimentConfig:
    model: JobModel
    space: ConfigSpace
    cost: CostFn
    epsilon: float
    r_values: list
    horizon_events: int = 1_000_000
    warmup_fraction: float = 0.1
    replications: int = 1
    master_seed: int = 0
    nbatches: int = 20
    baselines: list = field(default_factory=list)
    check_invariants: bool = False
    pilot_events: int = 20_000
    resolved: dict = field(default_factory=dict)
    content_hash: str = ""


def _need(data: dict, key: str, path: str):
    if key not in data:
        raise ConfigError(f"{path}.{key}: missing required field")
    return data[key]


def load_config(data: dict) -> ExperimentConfig:
    """Validate a parsed JSON document into an ExperimentConfig."""
    if not isinstance(data, dict):
        raise ConfigError("top level: expected a JSON object")
    mblock = _need(data, "model", "config")
    try:
        model = JobModel(
            num_phases=int(_need(mblock, "num_phases", "config.model")),
            internal_rates=_need(mblock, "internal_rates", "config.model"),
            departure_rates=_need(mblock, "departure_rates", "config.model"),
            arrival_coeffs=_need(mblock, "arrival_coeffs", "config.model"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config.model: {exc}") from exc

    kmax = int(_need(data, "kmax", "config"))
    space = enumerate_space(model.num_phases, kmax)

    cblock = _need(data, "cost", "config")
    ctype = _need(cblock, "type", "config.cost")
    if ctype == "overcommit":
        cost = overcommit_cost(
            space,
            _need(cblock, "weights", "config.cost"),
            _need(cblock, "capacity", "config.cost"),
            cblock.get("gamma"),
        )
    elif ctype == "table":
        values = _need(cblock, "values", "config.cost")
        gamma = cblock.get("gamma")
        if gamma is None:
            gamma = tightest_lipschitz(space, values)
        cost = make_cost_fn(space, values, gamma)
    else:
        raise ConfigError(f"config.cost.type: unknown type {ctype!r}")

    epsilon = float(_need(data, "epsilon", "config"))
    if epsilon < 0:
        raise ConfigError("config.epsilon: must be nonnegative")
    r_values = [float(r) for r in _need(data, "r_values", "config")]
    if not r_values or any(r <= 0 for r in r_values):
        raise ConfigError("config.r_values: need a nonempty positive list")
    replications = int(data.get("replications", 1))
    if replications < 1:
        raise ConfigError("config.replications: must be >= 1")
    warmup_fraction = float(data.get("warmup_fraction", 0.1))
    if not 0 <= warmup_fraction < 1:
        raise ConfigError("config.warmup_fraction: must be in [0, 1)")
    baselines = list(data.get("baselines", []))
    for b in baselines:
        if b not in ("first-fit", "new-server-always"):
            raise ConfigError(f"config.baselines: unknown strategy {b!r}")

    resolved = {
        "model": {
            "num_phases": model.num_phases,
            "internal_rates": model.internal_rates.tolist(),
            "departure_rates": model.departure_rates.tolist(),
            "arrival_coeffs": model.arrival_coeffs.tolist(),
        },
        "kmax": kmax,
        "cost": {"type": "table", "values": cost.table.tolist(),
                 "gamma": cost.lipschitz_bound},
        "epsilon": epsilon,
        "r_values": r_values,
        "horizon_events": int(data.get("horizon_events", 1_000_000)),
        "warmup_fraction": warmup_fraction,
        "replications": replications,
        "master_seed": int(data.get("master_seed", 0)),
        "nbatches": int(data.get("nbatches", 20)),
        "baselines": baselines,
        "check_invariants": bool(data.get("check_invariants", False)),
        "pilot_events": int(data.get("pilot_events", 20_000)),
    }
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return ExperimentConfig(
        model=model,
        space=space,
        cost=cost,
        epsilon=epsilon,
        r_values=r_values,
        horizon_events=resolved["horizon_events"],
        warmup_fraction=warmup_fraction,
        replications=replications,
        master_seed=resolved["master_seed"],
        nbatches=resolved["nbatches"],
        baselines=baselines,
        check_invariants=resolved["check_invariants"],
        pilot_events=resolved["pilot_events"],
        resolved=resolved,
        content_hash=hashlib.sha256(blob.encode()).hexdigest(),
    )


def solve_pipeline(cfg: ExperimentConfig):
    """LP solve, policy build, decomposition, and per-class oracles."""
    problem = assemble_lp(cfg.model, cfg.space, cfg.cost, cfg.epsilon)
    sol = solve_lp(problem)
    pol = policy.build_policy(sol, cfg.space)
    dec = policy.decompose(pol, sol, cfg.model, cfg.space)
    oracles = [
        oracle.ctmc_oracle(pol, cfg.model, cfg.space, cls, cfg.cost)
        for cls in dec.classes
    ]
    return problem, sol, pol, dec, oracles


def busy_probability(dec, oracles, space: ConfigSpace) -> float:
    """P(server nonempty) under the class-weighted stationary mixture."""
    zero = space.index_of((0,) * space.num_phases)
    pi0 = sum(
        w * res.pi[zero] for w, res in zip(dec.weights, oracles)
    )
    return 1.0 - float(pi0)


def _fleet_task(kernel_plan):
    return fleet._backend.run_fleet(kernel_plan)


def _baseline_task(plan):
    return fleet._backend.run_baseline(plan)


def run_sweep(cfg: ExperimentConfig, sol, dec, oracles, workers: int = 1,
              trace_dir=None):
    """Simulate every (r, replication); returns per-run and merged stats.

    Horizons are sized per r from a deterministic pilot run so that each
    run covers about cfg.horizon_events events.
    """
    p_busy = busy_probability(dec, oracles, cfg.space)
    rows = []
    summaries = []
    gap_points = []
    tasks = {}

    def seed_for(gi, rep):
        return derive_seed(cfg.master_seed, 17, gi, rep)

    run_specs = []
    for gi, r in enumerate(cfg.r_values):
        plan0 = fleet.init_world(
            cfg.model, cfg.space, cfg.cost, dec, sol.phi, r, seed_for(gi, 0)
        )
        rate = fleet.estimate_event_rate(plan0, cfg.pilot_events)
        horizon = cfg.horizon_events / rate
        warmup = cfg.warmup_fraction * horizon
        for rep in range(cfg.replications):
            plan = fleet.init_world(
                cfg.model, cfg.space, cfg.cost, dec, sol.phi, r,
                seed_for(gi, rep), horizon=horizon, warmup=warmup,
                nbatches=cfg.nbatches, check=cfg.check_invariants,
                trace=trace_dir is not None,
            )
            run_specs.append((gi, r, rep, plan))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                (gi, rep): pool.submit(_fleet_task, plan.kernel_plan)
                for gi, r, rep, plan in run_specs
            }
            raws = {key: fut.result() for key, fut in futures.items()}
    else:
        raws = {
            (gi, rep): fleet.run(plan)
            for gi, r, rep, plan in run_specs
        }

    by_r = {}
    for gi, r, rep, plan in run_specs:
        raw = raws[(gi, rep)]
        if trace_dir is not None and raw.get("trace") is not None:
            _write_trace(trace_dir, r, rep, raw["trace"])
        acc = metrics.MetricsAccumulator.from_kernel(raw)
        by_r.setdefault(gi, []).append(acc)
        est = metrics.estimate(acc)
        nbar = plan.nbar
        comparator = math.ceil(nbar) * p_busy
        rows.append(_row(r, str(rep), seed_for(gi, rep), acc, est, nbar,
                         comparator, cfg.space.num_phases))

    for gi, r in enumerate(cfg.r_values):
        merged = metrics.merge_all(by_r[gi])
        est = metrics.estimate(merged)
        nbar = required_servers(sol.phi, r)
        comparator = math.ceil(nbar) * p_busy
        rows.append(_row(r, "all", cfg.master_seed, merged, est, nbar,
                         comparator, cfg.space.num_phases))
        summaries.append((r, est, merged))
        gap = est["active"].value - comparator
        means = merged.active / merged.batch_len
        if means.shape[0] > 1:
            se = float(means.std(ddof=1)) / math.sqrt(means.shape[0])
        else:
            se = 1.0
        gap_points.append((r, gap, max(se, 1e-12)))

    fit = metrics.gap_scaling(gap_points) if len(gap_points) >= 3 else None
    return rows, summaries, fit, p_busy


def run_baselines(cfg: ExperimentConfig, workers: int = 1):
    """Greedy dispatcher sweeps for comparison; same protocol as run_sweep."""
    rows = []
    for strategy in cfg.baselines:
        for gi, r in enumerate(cfg.r_values):
            seed = derive_seed(cfg.master_seed, 23, gi, 0)
            probe = fleet.build_baseline_plan(
                cfg.model, cfg.space, cfg.cost, r, strategy, seed,
                horizon=float("inf"), warmup=0.0, nbatches=cfg.nbatches,
                max_events=cfg.pilot_events,
            )
            out = fleet.run_baseline(probe)
            rate = out["events"] / out["end_time"]
            horizon = cfg.horizon_events / rate
            accs = []
            for rep in range(cfg.replications):
                plan = fleet.build_baseline_plan(
                    cfg.model, cfg.space, cfg.cost, r, strategy,
                    derive_seed(cfg.master_seed, 23, gi, rep),
                    horizon=horizon, warmup=cfg.warmup_fraction * horizon,
                    nbatches=cfg.nbatches,
                )
                accs.append(
                    metrics.MetricsAccumulator.from_kernel(fleet.run_baseline(plan))
                )
            merged = metrics.merge_all(accs)
            est = metrics.estimate(merged)
            rows.append((strategy, r, est, merged))
    return rows


def _row(r, rep, seed, acc, est, nbar, comparator, n_ph):
    cpa = est["cost_per_active"]
    row = {
        "r": r,
        "replication": rep,
        "seed": seed,
        "events": acc.events,
        "events_post": acc.events_post,
        "window": acc.window,
        "active": est["active"].value,
        "active_lo": est["active"].lo,
        "active_hi": est["active"].hi,
        "cost_rate": est["cost_mean"],
        "cost_per_active": cpa.value if cpa else float("nan"),
        "cost_per_active_lo": cpa.lo if cpa else float("nan"),
        "cost_per_active_hi": cpa.hi if cpa else float("nan"),
        "virtual": est["virtual"].value,
        "virtual_lo": est["virtual"].lo,
        "virtual_hi": est["virtual"].hi,
        "backup": est["backup"].value,
        "backup_lo": est["backup"].lo,
        "backup_hi": est["backup"].hi,
        "nbar": nbar,
        "ceil_nbar": math.ceil(nbar),
        "comparator": comparator,
        "gap": est["active"].value - comparator,
    }
    for i in range(n_ph):
        row[f"tokens_{i}"] = est["tokens"][i].value
        row[f"tokens_{i}_lo"] = est["tokens"][i].lo
        row[f"tokens_{i}_hi"] = est["tokens"][i].hi
    return row


CSV_BASE_COLUMNS = [
    "r", "replication", "seed", "events", "events_post", "window",
    "active", "active_lo", "active_hi", "cost_rate", "cost_per_active",
    "cost_per_active_lo", "cost_per_active_hi", "virtual", "virtual_lo",
    "virtual_hi", "backup", "backup_lo", "backup_hi",
    "nbar", "ceil_nbar", "comparator", "gap",
]


def format_csv(rows, n_ph) -> str:
    columns = CSV_BASE_COLUMNS + [
        f"tokens_{i}{suffix}"
        for i in range(n_ph)
        for suffix in ("", "_lo", "_hi")
    ]
    out = [",".join(columns)]
    ordered = sorted(
        rows,
        key=lambda x: (
            x["r"],
            x["replication"] == "all",
            int(x["replication"]) if x["replication"] != "all" else -1,
        ),
    )
    for row in ordered:
        cells = []
        for col in columns:
            v = row[col]
            if isinstance(v, float):
                cells.append(f"{v:.12g}")
            else:
                cells.append(str(v))
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


def _write_trace(trace_dir, r, rep, records):
    from ._backend import TRACE_NAMES

    path = trace_dir / f"trace_r{r:g}_rep{rep}.ndjson"
    with open(path, "w") as fh:
        for t, code, p, s, ty in records:
            fh.write(
                json.dumps(
                    {
                        "time": t,
                        "kind": TRACE_NAMES[code],
                        "pool": p,
                        "server": s,
                        "type": ty,
                    },
                    separators=(",", ":"),
                )
                + "\n"
            )


def single_server_horizon(
    pol, model, space, seed: int, target_events: int, pilot_events: int = 5000
) -> float:
    """Time horizon covering about target_events single-server events."""
    plan = single_sim.build_single_plan(
        pol, model, space, horizon=float("inf"), warmup=0.0, seed=seed,
        max_events=pilot_events,
    )
    out = fleet._backend.run_single(plan)
    if out["events"] < pilot_events or out["end_time"] <= 0:
        raise ConfigError("single-server pilot stalled; policy never acts")
    return target_events / (out["events"] / out["end_time"])


def verify_report(cfg: ExperimentConfig, sol, pol, dec, oracles) -> dict:
    """Exact-oracle and simulation agreement report, per recurrent class.

    The simulation check runs the class-restricted policy and compares
    empirical occupancy with the oracle and empirical request frequencies
    with the class share of the LP's u, in batch-means standard errors.
    """
    lam = np.asarray(cfg.model.arrival_coeffs)
    report = {
        "phi": sol.phi,
        "stationary_residual": stationary_residual(
            cfg.model, cfg.space, sol.pi, sol.u
        ),
        "num_classes": dec.num_classes,
        "weights": dec.weights.tolist(),
        "classes": [],
    }
    mix_phi = dec.mixture_request_rates()
    report["request_rate_residual"] = float(
        np.abs(mix_phi - sol.phi * lam).max()
    )
    report["reconstruction_pi_residual"] = float(
        np.abs(dec.mixture_pi() - sol.pi).max()
    )
    for j, cls in enumerate(dec.classes):
        res = oracles[j]
        entry = {
            "configs": [list(cfg.space.config_at(c)) for c in cls],
            "weight": float(dec.weights[j]),
            "tv_oracle_vs_lp": 0.5 * float(
                np.abs(res.pi - dec.class_pi[j]).sum()
            ),
            "request_rate_dev": float(
                np.abs(res.request_rates - dec.class_request_rates[j]).max()
            ),
            "conditional_cost": res.conditional_cost,
        }
        class_pol = dec.policies[j]
        seed = derive_seed(cfg.master_seed, 29, j, 0)
        horizon = single_server_horizon(
            class_pol, cfg.model, cfg.space, seed, cfg.horizon_events
        )
        sim = single_sim.simulate_single(
            class_pol, cfg.model, cfg.space, horizon,
            cfg.warmup_fraction * horizon, seed, nbatches=cfg.nbatches,
        )
        expected_freq = sol.u / dec.weights[j]
        mask = np.zeros(len(cfg.space), dtype=bool)
        mask[list(cls)] = True
        expected_freq = expected_freq * mask[None, :]
        pi_z = np.abs(sim.pi - res.pi) / np.maximum(sim.pi_se, 1e-12)
        pi_ok = np.abs(sim.pi - res.pi) <= np.maximum(3 * sim.pi_se, 1e-12)
        fq_z = np.abs(sim.freq - expected_freq) / np.maximum(sim.freq_se, 1e-12)
        fq_ok = np.abs(sim.freq - expected_freq) <= np.maximum(
            3 * sim.freq_se, 1e-12
        )
        entry["simulation"] = {
            "events": sim.events,
            "tv_vs_oracle": 0.5 * float(np.abs(sim.pi - res.pi).sum()),
            "max_pi_z": float(pi_z.max()),
            "pi_within_3se": bool(pi_ok.all()),
            "max_freq_z": float(fq_z.max()),
            "freq_within_3se": bool(fq_ok.all()),
            "request_rates": sim.request_rates.tolist(),
        }
        report["classes"].append(entry)
    return report
