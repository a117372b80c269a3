"""Command-line front end for scenario generation, planning, and reporting.

Subcommands:
    gen         sample a scenario set, write it as one canonical JSON file
    plan        solve one planning instance, write plan.json plus reports
    evaluate    price a previously written plan against a scenario set
    sweep       solve across a grid of preparation-window lengths
    compare     run the four operating strategies side by side
    export-mps  write the extensive-form model as an MPS file

Settings come from a single JSON config file (--config); command-line flags
override file values, and the ICEGRID_SEED environment variable overrides the
file's seed (an explicit --seed still wins). Every run prints its resolved
configuration, the configuration hash, and the seed; written artifacts carry
the same hash and seed so any output can be traced back to its inputs. The
hash covers everything that changes results; the output location and thread
count are deliberately excluded from it.

Exit codes: 0 success (sweep and compare record infeasible instances as data
and still exit 0), 1 infeasible plan or evaluation, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .grid_model import Network, parse_network
from .milp_builder import BudgetConfig, CostConfig, build_extensive
from .mps import export_mps
from .pha import PhaConfig, evaluate_first_stage
from .predictive import Horizon, PenaltySchedule
from .report import PlanRun, render_reports, solve_plan, strategy_compare, sweep_xi
from .scenario import (
    ScenarioConfig,
    ScenarioSet,
    generate_set,
    load_scenario_set,
    save_scenario_set,
)
from .solver import SolveOptions

__all__ = ["ConfigError", "dispatch", "main"]


class ConfigError(Exception):
    """Unusable configuration or command line; maps to exit code 2."""


class _Parser(argparse.ArgumentParser):
    # argparse wants to sys.exit(2) on bad flags; surface the message instead
    # so dispatch() owns the exit code.
    def error(self, message: str) -> None:  # type: ignore[override]
        raise ConfigError(f"{self.format_usage().rstrip()}\n{self.prog}: error: {message}")


_DEFAULTS: dict = {
    "network": None,
    "scenarios": {},      # {"path": file} or {"count": n, "sampling": {...}}
    "horizon": {},        # total, storm_start, optional storm_end (= total), xi
    "costs": {},          # CostConfig overrides; "gen" names gen_override
    "penalty": {},        # PenaltySchedule overrides: a, b, c
    "budgets": {},        # lines / storage caps; null means unlimited
    "solver": {},         # SolveOptions overrides
    "pha": {},            # PhaConfig overrides: rho, epsilon, max_iterations, ...
    "mode": "extensive",
    "seed": 0,
    "threads": 1,
    "per_step_modes": False,
    "xi_grid": [0, 2, 4, 6],
}


# ------------------------------------------------------- config resolution

def _load_json(path: str | Path, what: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} file {p} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{what} file {p} must hold a JSON object")
    return doc


def _parse_int(text: str, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{what} must be an integer, got {text!r}") from None


def _xi_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated integers, got {text!r}"
        ) from None


def resolve_config(args: argparse.Namespace) -> dict:
    """Layer defaults <- config file <- ICEGRID_SEED <- explicit flags."""
    cfg = copy.deepcopy(_DEFAULTS)
    if getattr(args, "config", None):
        doc = _load_json(args.config, "config")
        unknown = sorted(set(doc) - set(_DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        for key, value in doc.items():
            if isinstance(cfg[key], dict):
                if not isinstance(value, dict):
                    raise ConfigError(f"config section {key!r} must be an object")
                cfg[key].update(value)
            else:
                cfg[key] = value

    env_seed = os.environ.get("ICEGRID_SEED")
    if env_seed is not None:
        cfg["seed"] = _parse_int(env_seed, "ICEGRID_SEED")

    simple = ("network", "seed", "threads", "mode", "out")
    for name in simple:
        value = getattr(args, name, None)
        if value is not None:
            cfg[name] = value
    if getattr(args, "scenarios", None) is not None:
        cfg["scenarios"] = {"path": args.scenarios}
    if getattr(args, "count", None) is not None:
        cfg["scenarios"] = {k: v for k, v in cfg["scenarios"].items() if k != "path"}
        cfg["scenarios"]["count"] = args.count
    xi = getattr(args, "xi", None)
    if xi is not None:
        if isinstance(xi, list):
            cfg["xi_grid"] = xi
        else:
            cfg["horizon"]["xi"] = xi
    if getattr(args, "gap", None) is not None:
        cfg["solver"]["relative_mip_gap"] = args.gap
    if getattr(args, "time_limit", None) is not None:
        cfg["solver"]["time_limit"] = args.time_limit

    if cfg["mode"] not in ("extensive", "pha"):
        raise ConfigError(f"mode must be 'extensive' or 'pha', got {cfg['mode']!r}")
    cfg["seed"] = _parse_int(str(cfg["seed"]), "seed")
    cfg["threads"] = max(1, _parse_int(str(cfg["threads"]), "threads"))
    return cfg


def config_hash(cfg: dict) -> str:
    """Digest of the result-relevant configuration (not out/threads/seed)."""
    doc = {k: v for k, v in cfg.items() if k not in ("out", "threads", "seed")}
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _echo(cfg: dict) -> None:
    shown = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    print(f"resolved config: {shown}")
    print(f"config hash: {config_hash(cfg)}")
    print(f"seed: {cfg['seed']}")


# ------------------------------------------------------ section factories

def _build_section(name: str, ctor, doc: dict):
    try:
        return ctor(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {name!r} settings: {exc}") from None


def _network_from(cfg: dict) -> Network:
    path = cfg.get("network")
    if not path:
        raise ConfigError("a network file is required (config 'network' or --network)")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"network file not found: {p}")
    return parse_network(p)


def _horizon_from(cfg: dict) -> Horizon:
    doc = cfg["horizon"]
    missing = [k for k in ("total", "storm_start") if k not in doc]
    if missing:
        raise ConfigError(f"horizon settings missing {', '.join(missing)}")
    total = int(doc["total"])
    return _build_section("horizon", Horizon, {
        "total": total,
        "storm_start": int(doc["storm_start"]),
        "storm_end": int(doc.get("storm_end", total)),
        "xi": int(doc.get("xi", 0)),
    })


def _costs_from(cfg: dict) -> CostConfig:
    doc = dict(cfg["costs"])
    if "penalty" in doc:
        raise ConfigError("put penalty settings in the top-level 'penalty' section")
    if "gen" in doc:
        doc["gen_override"] = doc.pop("gen")
    penalty = _build_section("penalty", PenaltySchedule, dict(cfg["penalty"]))
    return _build_section("costs", CostConfig, {"penalty": penalty, **doc})


def _budgets_from(cfg: dict) -> BudgetConfig:
    doc = {
        key: (math.inf if value is None else value)
        for key, value in cfg["budgets"].items()
    }
    return _build_section("budgets", BudgetConfig, doc)


def _solve_options_from(cfg: dict) -> SolveOptions:
    return _build_section("solver", SolveOptions, dict(cfg["solver"]))


def _pha_config_from(cfg: dict, options: SolveOptions,
                     log_path: Path | None) -> PhaConfig:
    doc = dict(cfg["pha"])
    if isinstance(doc.get("rho"), list):
        doc["rho"] = np.asarray(doc["rho"], dtype=float)
    doc.setdefault("solve_options", options)
    doc.setdefault("threads", cfg["threads"])
    doc.setdefault("log_path", log_path)
    return _build_section("pha", PhaConfig, doc)


def _scenario_set_from(cfg: dict, net: Network, horizon: Horizon) -> ScenarioSet:
    doc = cfg["scenarios"]
    path = doc.get("path")
    if path:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"scenario file not found: {p}")
        ss = load_scenario_set(p)
        recorded = ss.meta.get("horizon", {})
        if recorded and recorded.get("total") != horizon.total:
            raise ConfigError(
                f"scenario file {p} was sampled on a {recorded.get('total')}-step "
                f"horizon but the run uses {horizon.total} steps"
            )
        return ss
    if "count" not in doc:
        raise ConfigError("scenarios section needs either 'path' or 'count'")
    count = int(doc["count"])
    sampling = _build_section("scenarios.sampling", ScenarioConfig,
                              dict(doc.get("sampling") or {}))
    try:
        return generate_set(net, horizon, sampling, seed=cfg["seed"],
                            count=count, threads=cfg["threads"])
    except ValueError as exc:
        raise ConfigError(f"scenario generation failed: {exc}") from None


# --------------------------------------------------------------- commands

def _require_out(cfg: dict, what: str) -> Path:
    out = cfg.get("out")
    if not out:
        raise ConfigError(f"--out is required: {what}")
    return Path(out)


def _out_dir(cfg: dict) -> Path:
    out = _require_out(cfg, "directory for run artifacts")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command: str, cfg: dict) -> None:
    doc = {
        "command": command,
        "config_hash": config_hash(cfg),
        "seed": cfg["seed"],
        "resolved": cfg,
    }
    (out / "run.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _header_note(cfg: dict) -> str:
    return f"Run `config {config_hash(cfg)}`, seed {cfg['seed']}."


def _expected_split(run: PlanRun, ss: ScenarioSet) -> dict:
    plan = run.plan
    pairs = [(s.id, s.probability) for s in ss.scenarios]
    return {
        "investment_cost": plan.investment_cost,
        "preventive_cost": sum(p * plan.psi_normal[sid] for sid, p in pairs),
        "emergency_cost": sum(p * plan.psi_emergency[sid] for sid, p in pairs),
    }


def _cmd_gen(cfg: dict, args: argparse.Namespace) -> int:
    out = _require_out(cfg, "path of the scenario file to write")
    net = _network_from(cfg)
    horizon = _horizon_from(cfg)
    doc = cfg["scenarios"]
    if "count" not in doc:
        raise ConfigError("gen needs a scenario count (config scenarios.count or --count)")
    sampling = _build_section("scenarios.sampling", ScenarioConfig,
                              dict(doc.get("sampling") or {}))
    ss = generate_set(net, horizon, sampling, seed=cfg["seed"],
                      count=int(doc["count"]), threads=cfg["threads"])
    out.parent.mkdir(parents=True, exist_ok=True)
    save_scenario_set(ss, out)
    print(f"wrote {out}: {len(ss)} scenarios, set hash {ss.meta['config_hash'][:16]}")
    return 0


def _pha_or_none(cfg: dict, options: SolveOptions, out: Path | None) -> PhaConfig | None:
    if cfg["mode"] != "pha":
        return None
    log = out / "pha_iterations.csv" if out is not None else None
    return _pha_config_from(cfg, options, log)


def _cmd_plan(cfg: dict, args: argparse.Namespace) -> int:
    out = _out_dir(cfg)
    net = _network_from(cfg)
    horizon = _horizon_from(cfg)
    costs = _costs_from(cfg)
    budgets = _budgets_from(cfg)
    options = _solve_options_from(cfg)
    ss = _scenario_set_from(cfg, net, horizon)
    run = solve_plan(net, ss.scenarios, horizon, costs, budgets, options,
                     mode=cfg["mode"], pha_config=_pha_or_none(cfg, options, out),
                     per_step_modes=cfg["per_step_modes"])
    doc = {
        "config_hash": config_hash(cfg),
        "seed": cfg["seed"],
        "mode": cfg["mode"],
        "status": run.status,
        "feasible": run.feasible,
        "objective": run.objective,
        "hardening": run.plan.hardening if run.feasible else None,
        "storage_mwh": run.plan.storage_mwh if run.feasible else None,
    }
    if run.feasible:
        doc.update(_expected_split(run, ss))
    (out / "plan.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    _write_manifest(out, "plan", cfg)
    if not run.feasible:
        print(f"plan: no feasible plan (solver status {run.status})")
        return 1
    render_reports(out, investment=run.plan, header_note=_header_note(cfg))
    hardened = sorted(cid for cid, v in run.plan.hardening.items() if v)
    print(f"plan: objective {run.objective:.2f} (status {run.status})")
    print(f"plan: hardened {hardened or 'nothing'}, storage {run.plan.storage_mwh}")
    return 0


def _cmd_evaluate(cfg: dict, args: argparse.Namespace) -> int:
    out = _out_dir(cfg)
    net = _network_from(cfg)
    horizon = _horizon_from(cfg)
    costs = _costs_from(cfg)
    budgets = _budgets_from(cfg)
    options = _solve_options_from(cfg)
    ss = _scenario_set_from(cfg, net, horizon)
    plan_doc = _load_json(args.plan, "plan")
    try:
        hardening = plan_doc["hardening"]
        storage = plan_doc["storage_mwh"]
        v = np.array(
            [float(hardening[c.id]) for c in net.corridors]
            + [float(storage[s.bus]) for s in net.storage_sites]
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(
            f"plan file {args.plan} lacks a usable first stage: {exc}"
        ) from None
    expected, _, flagged = evaluate_first_stage(
        net, ss.scenarios, horizon, costs, budgets, v=v,
        solve_options=options, threads=cfg["threads"],
        per_step_modes=cfg["per_step_modes"],
    )
    doc = {
        "config_hash": config_hash(cfg),
        "seed": cfg["seed"],
        "plan_file": str(args.plan),
        "feasible": not flagged,
        "expected_cost": expected,
        "infeasible_scenarios": flagged,
    }
    (out / "evaluation.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    _write_manifest(out, "evaluate", cfg)
    if flagged:
        print(f"evaluate: plan infeasible on scenarios {flagged}")
        return 1
    print(f"evaluate: expected cost {expected:.2f} over {len(ss)} scenarios")
    return 0


def _cmd_sweep(cfg: dict, args: argparse.Namespace) -> int:
    out = _out_dir(cfg)
    net = _network_from(cfg)
    horizon = _horizon_from(cfg)
    costs = _costs_from(cfg)
    budgets = _budgets_from(cfg)
    options = _solve_options_from(cfg)
    ss = _scenario_set_from(cfg, net, horizon)
    grid = [int(x) for x in cfg["xi_grid"]]
    if not grid:
        raise ConfigError("sweep needs at least one xi value (--xi or xi_grid)")
    rows = sweep_xi(net, ss.scenarios, horizon, grid, costs, budgets, options,
                    mode=cfg["mode"], pha_config=_pha_or_none(cfg, options, None),
                    per_step_modes=cfg["per_step_modes"])
    render_reports(out, sweep=rows, header_note=_header_note(cfg))
    _write_manifest(out, "sweep", cfg)
    for row in rows:
        if row.feasible:
            print(f"sweep: xi={row.xi} total={row.total_cost:.2f}")
        else:
            print(f"sweep: xi={row.xi} infeasible")
    return 0


def _cmd_compare(cfg: dict, args: argparse.Namespace) -> int:
    out = _out_dir(cfg)
    net = _network_from(cfg)
    horizon = _horizon_from(cfg)
    costs = _costs_from(cfg)
    budgets = _budgets_from(cfg)
    options = _solve_options_from(cfg)
    ss = _scenario_set_from(cfg, net, horizon)
    results = strategy_compare(net, ss.scenarios, horizon, costs, budgets, options,
                               mode=cfg["mode"],
                               pha_config=_pha_or_none(cfg, options, None),
                               per_step_modes=cfg["per_step_modes"])
    render_reports(out, strategies=results, header_note=_header_note(cfg))
    _write_manifest(out, "compare", cfg)
    for res in results:
        if res.feasible:
            print(f"compare: {res.strategy} preparation={res.preparation_cost:.2f} "
                  f"emergency={res.emergency_cost:.2f}")
        else:
            print(f"compare: {res.strategy} infeasible")
    return 0


def _cmd_export_mps(cfg: dict, args: argparse.Namespace) -> int:
    out = _require_out(cfg, "path of the MPS file to write")
    net = _network_from(cfg)
    horizon = _horizon_from(cfg)
    costs = _costs_from(cfg)
    budgets = _budgets_from(cfg)
    ss = _scenario_set_from(cfg, net, horizon)
    problem = build_extensive(net, ss.scenarios, horizon, costs, budgets,
                              per_step_modes=cfg["per_step_modes"])
    # the NAME record carries provenance; it survives a parse round-trip
    problem.meta["name"] = f"ICEGRID_{config_hash(cfg)}_S{cfg['seed']}"
    out.parent.mkdir(parents=True, exist_ok=True)
    export_mps(problem, out)
    print(f"wrote {out}: {problem.n_rows} rows, {problem.n_cols} cols")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "plan": _cmd_plan,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
    "compare": _cmd_compare,
    "export-mps": _cmd_export_mps,
}


# ----------------------------------------------------------------- parser

def _add_common(p: argparse.ArgumentParser, out_help: str) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--network", help="network JSON file (overrides config)")
    p.add_argument("--seed", type=int, help="random seed (overrides config and env)")
    p.add_argument("--threads", type=int, help="concurrency cap")
    p.add_argument("--out", help=out_help)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="icegrid",
                     description="Grid resilience planning under ice storms.")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("gen", parents=(), help="sample and save a scenario set")
    _add_common(p, "scenario file to write")
    p.add_argument("--count", type=int, help="number of scenarios")

    p = sub.add_parser("plan", help="solve one planning instance")
    _add_common(p, "directory for plan.json and reports")
    p.add_argument("--scenarios", help="scenario set file")
    p.add_argument("--mode", choices=("extensive", "pha"))
    p.add_argument("--xi", type=int, help="preparation window length")
    p.add_argument("--gap", type=float, help="relative MIP gap")
    p.add_argument("--time-limit", type=float, dest="time_limit")

    p = sub.add_parser("evaluate", help="price a written plan on a scenario set")
    _add_common(p, "directory for evaluation.json")
    p.add_argument("--plan", required=True, help="plan.json from a plan run")
    p.add_argument("--scenarios", help="scenario set file")
    p.add_argument("--xi", type=int, help="preparation window length")

    p = sub.add_parser("sweep", help="solve across preparation-window lengths")
    _add_common(p, "directory for sweep.csv and charts")
    p.add_argument("--scenarios", help="scenario set file")
    p.add_argument("--mode", choices=("extensive", "pha"))
    p.add_argument("--xi", type=_xi_list, help="comma-separated xi grid, e.g. 2,4,6")
    p.add_argument("--gap", type=float, help="relative MIP gap")
    p.add_argument("--time-limit", type=float, dest="time_limit")

    p = sub.add_parser("compare", help="run operating strategies I-IV")
    _add_common(p, "directory for strategies.csv")
    p.add_argument("--scenarios", help="scenario set file")
    p.add_argument("--mode", choices=("extensive", "pha"))
    p.add_argument("--gap", type=float, help="relative MIP gap")
    p.add_argument("--time-limit", type=float, dest="time_limit")

    p = sub.add_parser("export-mps", help="write the extensive form as MPS")
    _add_common(p, "MPS file to write")
    p.add_argument("--scenarios", help="scenario set file")
    p.add_argument("--xi", type=int, help="preparation window length")
    return parser


def dispatch(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.error("a command is required")
        cfg = resolve_config(args)
        _echo(cfg)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except ValueError as exc:
        # domain validation surfaced past the config layer
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse --help
        code = exc.code
        return 0 if code in (None, 0) else int(code)


def main() -> None:
    raise SystemExit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
