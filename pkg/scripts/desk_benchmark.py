"""Run the bundled DDR desk benchmark and print its feasibility table.

    python scripts/desk_benchmark.py [--out out/desk] [--seed 7]
"""

import argparse
import json
import time
from importlib import resources

from catp.cli import cmd_optimize
from catp.scenario import load_scenario


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="out/desk_benchmark")
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args()

    loaded = load_scenario(resources.files("catp") / "scenarios" / "ddr_desk_benchmark.yaml")
    start = time.perf_counter()
    res = cmd_optimize(loaded, args.out, seed=args.seed)
    elapsed = time.perf_counter() - start
    sol = res["solution"]
    print(f"{sol.status} in {elapsed:.2f} s, cost {sol.cost:.6g}")
    for row in sol.feasibility:
        print(f"  {row['name']:<10} {row['mode']:<8} residual {row['residual']:>12.5g}  "
              f"{'ok' if row['satisfied'] else 'VIOLATED'}")
    print(json.dumps({k: sol.breakdown[k] for k in ("motion_energy", "comm_energy", "expected_bits")
                      if k in sol.breakdown}, indent=2))
    print(f"report: {res['report']}")


if __name__ == "__main__":
    main()
