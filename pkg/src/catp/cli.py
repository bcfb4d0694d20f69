"""Command-line entry point: ``catp simulate | optimize | channel-map | validate``.

Exit codes: 0 success, 2 scenario/schema error, 3 optimisation ended
infeasible, 4 runtime model error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, comms
from .channel import Grid2D, OutsideFieldError, RadioMap, RangeError
from .energy import square_norm_energy
from .motion._util import SingularityError
from .motion.integrate import IntegrationError, Trajectory
from .planner import Evaluator, breakdown, feasibility_table, solve
from .scenario import (
    LoadedScenario,
    ScenarioError,
    build_all,
    build_budget,
    build_solver_config,
    load_scenario,
)
from .validation import run_validation

CSV_SCHEMA_VERSION = 1
EXIT_OK, EXIT_SCHEMA, EXIT_INFEASIBLE, EXIT_RUNTIME = 0, 2, 3, 4
LINK_COLUMNS = ("gain_db", "snr_db", "tx_power_w", "rate_bps", "outage", "cum_E_motion_J", "cum_E_comm_J")


class MemoryBudgetError(RuntimeError):
    pass


RUNTIME_ERRORS = (IntegrationError, OutsideFieldError, RangeError, SingularityError, FloatingPointError,
                  MemoryBudgetError, ValueError)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    return repr(float(v))


def _cell(v) -> str:
    """CSV cell; NaN (e.g. the control after the last sample) is left empty."""
    if isinstance(v, (bool, np.bool_)):
        return _fmt(v)
    return "" if math.isnan(v) else _fmt(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else ("inf" if f > 0 else "-inf" if f < 0 else "nan")
    return obj


def write_report(path: Path, report: dict) -> str:
    """Write a canonical JSON report carrying the hash of its own content."""
    body = _jsonable(report)
    digest = hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()
    body["report_hash"] = digest
    path.write_text(json.dumps(body, sort_keys=True, indent=2) + "\n")
    return digest


def cumulative_motion_energy(traj: Trajectory, motion_energy) -> np.ndarray:
    """Motion energy spent up to each sample, by evaluating growing prefixes."""
    out = np.zeros(traj.n_intervals + 1)
    for k in range(1, traj.n_intervals + 1):
        prefix = Trajectory(traj.t0, traj.dt, traj.states[: k + 1], traj.controls[:k], None, traj.model_name)
        out[k] = float(square_norm_energy(prefix.controls, prefix.dt) if motion_energy is None else motion_energy(prefix))
    return out


def trajectory_table(traj: Trajectory, model, problem, channel, budget):
    """Per-sample rows: time, states, controls, one channel realisation and cumulative energies."""
    n = traj.n_intervals + 1
    cols = {"t": traj.times}
    for i, label in enumerate(model.state_labels):
        cols[label] = traj.states[:, i]
    for i, label in enumerate(model.control_labels):
        cols[label] = np.concatenate([traj.controls[:, i], [np.nan]])
    if channel is not None and budget is not None:
        rec = comms.link_records(traj, channel, budget, problem.peer, model.position_indices)
        cols["gain_db"] = rec.gain_db
        cols["snr_db"] = rec.snr_db
        cols["tx_power_w"] = rec.tx_power
        cols["rate_bps"] = rec.rate
        cols["outage"] = rec.outage
        cum_comm = np.broadcast_to(rec.energy, (n,))
    else:
        rec = None
        for name in LINK_COLUMNS[:5]:
            cols[name] = np.full(n, np.nan)
        cum_comm = np.zeros(n)
    cols["cum_E_motion_J"] = cumulative_motion_energy(traj, problem.motion_energy)
    cols["cum_E_comm_J"] = cum_comm
    return cols, rec


def write_trajectory_csv(path: Path, cols: dict):
    names = list(cols)
    lines = [
        f"# catp-trajectory schema {CSV_SCHEMA_VERSION}; units: t s, positions m, angles rad, "
        "gain_db dB, snr_db dB, tx_power_w W, rate_bps bit/s, energies J",
        ",".join(names),
    ]
    n = len(cols["t"])
    for i in range(n):
        lines.append(",".join(_cell(cols[name][i]) for name in names))
    path.write_text("\n".join(lines) + "\n")


def _header(loaded: LoadedScenario, command: str) -> dict:
    return {
        "schema_version": CSV_SCHEMA_VERSION,
        "tool_version": __version__,
        "command": command,
        "scenario": loaded.spec.name,
        "scenario_hash": loaded.hash,
        "seed": loaded.spec.seed,
    }


def _apply_overrides(loaded: LoadedScenario, seed, mc_samples) -> LoadedScenario:
    loaded = loaded.with_seed(seed)
    if mc_samples is not None:
        spec = loaded.spec
        problem = spec.problem.model_copy(update={"mc_samples": int(mc_samples)})
        loaded = LoadedScenario(spec.model_copy(update={"problem": problem}), loaded.path, loaded.text)
    return loaded


def _timing(out: Path, name: str, start: float):
    (out / name).write_text(json.dumps({"wall_time_s": time.perf_counter() - start}, indent=2) + "\n")


def cmd_simulate(loaded: LoadedScenario, out_dir, seed=None, mc_samples=None) -> dict:
    """Roll out the scenario's control profile and account for one channel realisation."""
    start = time.perf_counter()
    loaded = _apply_overrides(loaded, seed, mc_samples)
    spec = loaded.spec
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model, channel, problem, controls = build_all(loaded)
    budget = build_budget(spec)
    evaluator = Evaluator(problem)
    decision = np.concatenate([controls.ravel(), _fixed_tail(problem)])
    traj = evaluator.trajectory(decision)
    ev = evaluator.evaluate_strict(decision[None, :])
    cols, rec = trajectory_table(traj, model, problem, channel, budget)
    csv_path = out / spec.output.trajectory_csv
    write_trajectory_csv(csv_path, cols)
    report = _header(loaded, "simulate")
    report.update({
        "breakdown": breakdown(ev, 0),
        "feasibility": feasibility_table(problem, ev, 0, decision),
        "horizon_s": traj.duration,
        "intervals": traj.n_intervals,
        "realized": None if rec is None else {
            "bits": float(np.sum(0.5 * (rec.rate[1:] + rec.rate[:-1])) * traj.dt),
            "outage_fraction": float(np.mean(rec.outage)),
            "comm_energy_J": float(cols["cum_E_comm_J"][-1]),
        },
        "saturated_steps": int(np.sum(traj.saturated)) if traj.saturated is not None else 0,
    })
    report_path = out / spec.output.report
    digest = write_report(report_path, report)
    _timing(out, spec.output.timing, start)
    return {"csv": csv_path, "report": report_path, "report_hash": digest, "trajectory": traj}


def _fixed_tail(problem):
    """Decision entries after the controls: nominal horizon, budget power and zero slacks."""
    lay = problem.layout
    tail = np.zeros(lay["size"] - lay["controls"].stop)
    if "T" in lay:
        tail[lay["T"] - lay["controls"].stop] = problem.T
    if "power" in lay:
        tail[lay["power"] - lay["controls"].stop] = problem.budget.policy.power
    return tail


def cmd_optimize(loaded: LoadedScenario, out_dir, seed=None, mc_samples=None, history=False) -> dict:
    start = time.perf_counter()
    loaded = _apply_overrides(loaded, seed, mc_samples)
    spec = loaded.spec
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model, channel, problem, _ = build_all(loaded)
    budget = build_budget(spec)
    want_history = history or spec.output.history is not None
    sol = solve(problem, build_solver_config(spec, record_history=want_history), spec.seed)
    csv_path = out / spec.output.trajectory_csv
    if sol.trajectory is not None:
        traj = sol.trajectory
        if "power" in problem.layout:
            budget = budget.with_power(float(sol.decision[problem.layout["power"]]))
        cols, _ = trajectory_table(traj, model, problem, channel, budget)
        write_trajectory_csv(csv_path, cols)
    diagnostics = {k: v for k, v in sol.diagnostics.items() if k != "wall_time_s"}
    report = _header(loaded, "optimize")
    report.update({
        "status": sol.status,
        "feasible": sol.feasible,
        "cost": sol.cost,
        "breakdown": sol.breakdown,
        "feasibility": sol.feasibility,
        "mc_standard_errors": {"expected_bits": sol.breakdown["expected_bits_stderr"]},
        "diagnostics": diagnostics,
        "decision": sol.decision,
        "layout": {k: (v if isinstance(v, int) else [v.start, v.stop]) for k, v in problem.layout.items()},
    })
    report_path = out / spec.output.report
    digest = write_report(report_path, report)
    result = {"csv": csv_path, "report": report_path, "report_hash": digest, "solution": sol}
    if want_history and sol.history is not None:
        hist_path = out / (spec.output.history or "history.json")
        hist_path.write_text(json.dumps(_jsonable(sol.history), sort_keys=True, indent=1) + "\n")
        result["history"] = hist_path
    _timing(out, spec.output.timing, start)
    return result


def channel_map(loaded: LoadedScenario, seed=None) -> RadioMap:
    loaded = loaded.with_seed(seed)
    spec = loaded.spec
    if spec.channel_map is None:
        raise ScenarioError(loaded.path, ["channel-map needs a channel_map block with workspace bounds"])
    cm = spec.channel_map
    grid = Grid2D.covering(cm.lower_m[:2], cm.upper_m[:2], cm.spacing_m)
    if grid.size > cm.max_cells:
        raise MemoryBudgetError(
            f"radio map of {grid.shape[0]}x{grid.shape[1]} cells exceeds max_cells = {cm.max_cells}; "
            "use a coarser spacing or raise the budget"
        )
    _, channel, problem, _ = build_all(loaded)
    if channel is None:
        raise ScenarioError(loaded.path, ["channel-map needs a channel block"])
    xs, ys = grid.coordinates()
    p = np.stack([xs, ys], axis=-1)
    q = np.asarray(problem.peer, dtype=float)
    p, q = comms._match_dim(p, np.broadcast_to(q, p.shape[:-1] + q.shape[-1:]))
    layers = {
        "mean_gain_db": channel.mean_gain_db(p, q),
        "realization_db": channel.realization_db(p, q, cm.time_s),
    }
    return RadioMap(grid, layers)


def cmd_channel_map(loaded: LoadedScenario, out_dir, seed=None) -> dict:
    start = time.perf_counter()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rmap = channel_map(loaded, seed)
    path = out / loaded.spec.output.radio_map
    rmap.write(path)
    _timing(out, loaded.spec.output.timing, start)
    return {"radio_map": path, "map": rmap}


def cmd_validate(loaded: LoadedScenario, out_dir, seed=None, mc_samples=None) -> dict:
    start = time.perf_counter()
    loaded = loaded.with_seed(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_validation(loaded.spec.validate_, loaded.spec.seed, mc_samples)
    report = _header(loaded, "validate")
    report["checks"] = [r.as_dict() for r in rows]
    report["summary"] = {s: sum(r.status == s for r in rows) for s in ("pass", "fail", "skipped")}
    path = out / loaded.spec.output.report
    write_report(path, report)
    _timing(out, loaded.spec.output.timing, start)
    return {"report": path, "checks": rows}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="catp", description="Communications-aware trajectory planning runs.")
    parser.add_argument("--version", action="version", version=f"catp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "optimize", "channel-map", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=True, help="scenario YAML file")
        p.add_argument("--seed", type=int, default=None, help="master seed overriding the scenario's")
        p.add_argument("--out", default="out", help="output directory (default: ./out)")
        p.add_argument("--mc-samples", type=int, default=None, help="Monte-Carlo sample override")
        p.add_argument("--quiet", action="store_true", help="only report errors")
        if name == "optimize":
            p.add_argument("--history", action="store_true", help="also write the per-iteration elite log")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    say = (lambda *a: None) if args.quiet else print
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        loaded = load_scenario(args.scenario)
        if args.command == "simulate":
            res = cmd_simulate(loaded, args.out, args.seed, args.mc_samples)
            say(f"wrote {res['csv']} and {res['report']}")
        elif args.command == "optimize":
            res = cmd_optimize(loaded, args.out, args.seed, args.mc_samples, args.history)
            sol = res["solution"]
            say(f"{sol.status}: cost {sol.cost:.6g}; wrote {res['report']}")
            for row in sol.feasibility:
                say(f"  {row['name']:<20} {row['mode']:<8} residual {row['residual']:.4g} "
                    f"{'ok' if row['satisfied'] else 'VIOLATED'}")
            if not sol.feasible:
                return EXIT_INFEASIBLE
        elif args.command == "channel-map":
            res = cmd_channel_map(loaded, args.out, args.seed)
            say(f"wrote {res['radio_map']}")
        else:
            res = cmd_validate(loaded, args.out, args.seed, args.mc_samples)
            for r in res["checks"]:
                say(f"{r.status:<7} {r.name:<45} estimate {r.estimate} expected {r.expected} tol {r.tolerance}")
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except RUNTIME_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
