"""Batch front end: scenario configs in, result tables out.

Six commands share one invocation shape::

    python -m effham.cli --config scenario.yaml --command homogenize

``alpha``/``beta`` tabulate the effective Hamiltonian/Lagrangian on a
grid, ``homogenize``/``subcover`` run ladder experiments and write their
reports, ``spaces`` measures the rescaled-space convergence constants,
``validate`` checks the config and model assumptions without writing
anything.  Exit codes: 0 all checks passed, 1 a tolerance check failed,
2 the config was rejected, 3 a solver gave up.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .config import ScenarioConfig, load_config
from .errors import ConfigError, ModelValidityError, SolverError
from .homogenize import run_experiment, run_subcover_experiment
from .mather import LegendreDual, alpha_graph, alpha_torus_minimax
from .model import verify_tonelli
from .topology import estimate_space_convergence

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_SCHEMA = 2
EXIT_SOLVER = 3

COMMANDS = ("alpha", "beta", "homogenize", "subcover", "spaces", "validate")


def _fmt(x: float) -> str:
    return "%.17g" % float(x)


def _emit(record: dict, stream=None) -> None:
    (stream or sys.stdout).write(json.dumps(record, sort_keys=True) + "\n")


def _error_record(kind: str, exit_code: int, message: str, field=None) -> dict:
    err = {"kind": kind, "exit": exit_code, "message": message}
    if field is not None:
        err["field"] = field
    return {"error": err}


def _write_text(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _grid_nodes(dim: int, radius: float, n_points: int) -> np.ndarray:
    axis = np.linspace(-radius, radius, n_points)
    if dim == 1:
        return axis[:, None]
    aa, bb = np.meshgrid(axis, axis, indexing="ij")
    return np.stack([aa.ravel(), bb.ravel()], axis=1)


def _table_csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _alpha_fn(cfg: ScenarioConfig, radius: float):
    """Effective Hamiltonian as a callable, cheapest exact route first."""
    if cfg.cover.family == "graph":
        graph = cfg.cover.graph
        return lambda p: alpha_graph(graph, cfg.model, p)
    try:
        beta = cfg.beta_evaluator()
    except SolverError:
        return lambda p: alpha_torus_minimax(cfg.model, p)
    kappa, voff, _ = beta.coercivity()
    w_box = (radius + voff + 1.0) / (2.0 * kappa) + 1.0
    dual = LegendreDual(beta.value, cfg.cover.deck_rank,
                        p_box=w_box, p_points=129)
    return dual.value


def _cmd_alpha(cfg: ScenarioConfig, out_dir: str) -> int:
    dim = cfg.cover.deck_rank
    radius, n_points = cfg.p_grid["radius"], cfg.p_grid["points"]
    fn = _alpha_fn(cfg, radius)
    nodes = _grid_nodes(dim, radius, n_points)
    values = [float(fn(p)) for p in nodes]
    header = [f"p{i + 1}" for i in range(dim)] + ["alpha"]
    rows = [list(p) + [v] for p, v in zip(nodes, values)]
    _write_text(os.path.join(out_dir, f"{cfg.name}_alpha.csv"),
                _table_csv(header, rows))
    _write_text(os.path.join(out_dir, f"{cfg.name}_alpha.json"), json.dumps(
        {"scenario": cfg.name, "grid_radius": radius, "points": n_points,
         "nodes": [list(map(float, p)) for p in nodes], "alpha": values},
        sort_keys=True, indent=2) + "\n")
    _emit({"command": "alpha", "scenario": cfg.name, "rows": len(values),
           "passed": True})
    return EXIT_OK


def _cmd_beta(cfg: ScenarioConfig, out_dir: str) -> int:
    dim = cfg.cover.deck_rank
    beta = cfg.beta_evaluator()
    radius, n_points = cfg.w_grid["radius"], cfg.w_grid["points"]
    nodes = _grid_nodes(dim, radius, n_points)
    values = [float(beta.value(w)) for w in nodes]
    header = [f"w{i + 1}" for i in range(dim)] + ["beta"]
    rows = [list(w) + [v] for w, v in zip(nodes, values)]
    _write_text(os.path.join(out_dir, f"{cfg.name}_beta.csv"),
                _table_csv(header, rows))
    kappa, voff, knorm = beta.coercivity()
    _write_text(os.path.join(out_dir, f"{cfg.name}_beta.json"), json.dumps(
        {"scenario": cfg.name, "grid_radius": radius, "points": n_points,
         "coercivity": {"kappa": kappa, "offset": voff, "norm": knorm},
         "nodes": [list(map(float, w)) for w in nodes], "beta": values},
        sort_keys=True, indent=2) + "\n")
    _emit({"command": "beta", "scenario": cfg.name, "rows": len(values),
           "passed": True})
    return EXIT_OK


def _write_report(cfg: ScenarioConfig, report, command: str, out_dir: str) -> int:
    _write_text(os.path.join(out_dir, f"{cfg.name}_{command}.csv"),
                "\n".join(report.csv_lines()) + "\n")
    _write_text(os.path.join(out_dir, f"{cfg.name}_{command}.json"),
                report.to_json() + "\n")
    _emit({"command": command, "scenario": cfg.name,
           "passed": bool(report.passed),
           "final_error": report.final_error,
           "rate_exponent": report.rate_exponent})
    if not report.passed:
        _emit(_error_record("tolerance", EXIT_TOLERANCE,
                            f"scenario {cfg.name}: report pass flags not all true"))
        return EXIT_TOLERANCE
    return EXIT_OK


def _cmd_homogenize(cfg: ScenarioConfig, out_dir: str, threads: int) -> int:
    report = run_experiment(cfg.scenario(), beta_eval=cfg.beta_evaluator(),
                            threads=threads)
    return _write_report(cfg, report, "homogenize", out_dir)


def _cmd_subcover(cfg: ScenarioConfig, out_dir: str) -> int:
    if cfg.subcover is None:
        raise ConfigError("cover.subcover",
                          "required for the subcover command")
    report = run_subcover_experiment(cfg.scenario(),
                                     beta_eval=cfg.beta_evaluator())
    return _write_report(cfg, report, "subcover", out_dir)


def _cmd_spaces(cfg: ScenarioConfig, out_dir: str) -> int:
    sp = estimate_space_convergence(cfg.cover, cfg.eps_ladder, seed=cfg.seed)
    header = ["epsilon", "a_eps", "covering_radius"]
    rows = list(zip(cfg.eps_ladder, sp.a_eps, sp.covering_radius))
    _write_text(os.path.join(out_dir, f"{cfg.name}_spaces.csv"),
                _table_csv(header, rows))
    passed = bool(sp.a_slope_stable())
    _write_text(os.path.join(out_dir, f"{cfg.name}_spaces.json"), json.dumps(
        {"scenario": cfg.name, "fitted_k": sp.fitted_k,
         "a_eps": [float(v) for v in sp.a_eps],
         "covering_radius": [float(v) for v in sp.covering_radius],
         "a_slope": sp.a_slope(), "a_slope_stable": passed},
        sort_keys=True, indent=2) + "\n")
    _emit({"command": "spaces", "scenario": cfg.name, "passed": passed,
           "fitted_k": sp.fitted_k})
    if not passed:
        _emit(_error_record("tolerance", EXIT_TOLERANCE,
                            f"scenario {cfg.name}: distortion slope unstable"))
        return EXIT_TOLERANCE
    return EXIT_OK


def _cmd_validate(cfg: ScenarioConfig) -> int:
    checks = {"schema": True}
    messages = []
    if cfg.cover.family == "torus":
        audit = verify_tonelli(cfg.model)
        checks["convexity"] = bool(audit.convex_ok)
        checks["periodicity"] = bool(audit.periodic_ok)
        checks["superlinearity"] = bool(audit.superlinear_ok)
        messages += list(audit.messages)
    else:
        checks["edge_lengths"] = bool(np.all(cfg.cover.graph.lengths > 0.0))
        checks["cycle_rank"] = cfg.cover.graph.cycle_rank >= 1
    passed = all(checks.values())
    _emit({"command": "validate", "scenario": cfg.name, "passed": passed,
           "checks": checks, "messages": messages})
    if not passed:
        _emit(_error_record("schema", EXIT_SCHEMA,
                            f"scenario {cfg.name}: model audit failed",
                            field="system"))
        return EXIT_SCHEMA
    return EXIT_OK


def run(config_path: str, command: str, out_dir=None, threads: int = 1,
        seed_override=None) -> int:
    """Dispatch one command for one config; returns the process exit code."""
    if command not in COMMANDS:
        _emit(_error_record("schema", EXIT_SCHEMA,
                            f"unknown command {command!r}", field="--command"))
        return EXIT_SCHEMA
    try:
        cfg = load_config(config_path)
        if seed_override is not None:
            cfg = dataclasses.replace(cfg, seed=int(seed_override))
        target = out_dir if out_dir is not None else cfg.out_dir
        if command == "validate":
            return _cmd_validate(cfg)
        if command == "alpha":
            return _cmd_alpha(cfg, target)
        if command == "beta":
            return _cmd_beta(cfg, target)
        if command == "homogenize":
            return _cmd_homogenize(cfg, target, threads)
        if command == "subcover":
            return _cmd_subcover(cfg, target)
        return _cmd_spaces(cfg, target)
    except ConfigError as exc:
        _emit(_error_record("schema", EXIT_SCHEMA, exc.message, field=exc.path))
        return EXIT_SCHEMA
    except ModelValidityError as exc:
        _emit(_error_record("schema", EXIT_SCHEMA, str(exc), field="system"))
        return EXIT_SCHEMA
    except SolverError as exc:
        _emit(_error_record("solver", EXIT_SOLVER, str(exc)))
        return EXIT_SOLVER


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="effham", description="effective Hamiltonian batch runner")
    parser.add_argument("--config", required=True,
                        help="path to a scenario YAML file")
    parser.add_argument("--command", required=True,
                        help="one of " + ", ".join(COMMANDS))
    parser.add_argument("--out-dir", default=None,
                        help="artifact directory (default from the config)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for ladder experiments")
    parser.add_argument("--seed-override", type=int, default=None,
                        help="replace the config seed")
    args = parser.parse_args(argv)
    return run(args.config, args.command, out_dir=args.out_dir,
               threads=args.threads, seed_override=args.seed_override)


if __name__ == "__main__":
    sys.exit(main())
