"""Harden the terminal-state penalty of the point-to-point example step by step.

Each stage warm-starts from the previous optimum and raises (mu1, mu2). The
terminal violation should never grow along the schedule.

    python scripts/penalty_schedule.py [--scenario path.yaml] [--constraint terminal]
"""

import argparse
import dataclasses
from importlib import resources

from catp.planner import solve
from catp.scenario import build_all, build_solver_config, load_scenario

SCHEDULE = [(1e2, 10.0), (1e3, 50.0), (1e4, 100.0)]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scenario", default=str(resources.files("catp") / "scenarios" / "point_to_point_bits.yaml"))
    parser.add_argument("--constraint", default="terminal", help="name of the penalty constraint to harden")
    args = parser.parse_args()

    loaded = load_scenario(args.scenario)
    _, _, problem, _ = build_all(loaded)
    config = build_solver_config(loaded.spec)
    target = next(c for c in problem.constraints if c.name == args.constraint)
    others = [c for c in problem.constraints if c.name != args.constraint]

    previous = None
    print(f"{'mu1':>8} {'mu2':>6} {'violation':>12} {'cost':>12}")
    for mu1, mu2 in SCHEDULE:
        stage = problem.with_constraints(others + [dataclasses.replace(target, mu1=mu1, mu2=mu2)])
        sol = solve(stage, config, loaded.spec.seed, initial=previous)
        previous = sol.decision
        row = next(r for r in sol.feasibility if r["name"] == args.constraint)
        print(f"{mu1:8.0e} {mu2:6.0f} {max(row['residual'], 0.0):12.3e} {sol.cost:12.6g}")


if __name__ == "__main__":
    main()
