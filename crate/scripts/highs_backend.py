#!/usr/bin/env python3
"""Solve an MPS file with HiGHS and write an arbsched backend solution file.

Usage: highs_backend.py [--time-limit SECONDS] INSTANCE.mps SOLUTION.txt
"""
import argparse
import sys

import highspy


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--time-limit", type=float, default=None)
    ap.add_argument("mps")
    ap.add_argument("solution")
    args = ap.parse_args()

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", 1e-9)
    if args.time_limit is not None:
        h.setOptionValue("time_limit", args.time_limit)
    if h.readModel(args.mps) != highspy.HighsStatus.kOk:
        print(f"cannot read {args.mps}", file=sys.stderr)
        return 2
    h.run()
    status = h.getModelStatus()
    ms = highspy.HighsModelStatus
    words = {
        ms.kOptimal: "optimal",
        ms.kInfeasible: "infeasible",
        ms.kUnbounded: "unbounded",
        ms.kUnboundedOrInfeasible: "infeasible",
        ms.kTimeLimit: "limit-reached",
        ms.kIterationLimit: "limit-reached",
        ms.kSolutionLimit: "limit-reached",
    }
    word = words.get(status)
    if word is None:
        print(f"highs status {h.modelStatusToString(status)}", file=sys.stderr)
        return 3
    lines = [f"status {word}"]
    info = h.getInfo()
    has_point = word == "optimal" or (word == "limit-reached" and info.primal_solution_status == 2)
    if has_point:
        values = h.getSolution().col_value
        lp = h.getLp()
        lines.append(f"objective {info.objective_function_value!r}")
        for name, v in zip(lp.col_names_, values):
            lines.append(f"{name} {v!r}")
    with open(args.solution, "w") as f:
        f.write("\n".join(lines) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
