"""Pseudo-arclength continuation of the pulse family in eps; reports where the branch folds."""

import argparse

from maslov_wave.core_dynamics import Params
from maslov_wave.io import write_csv
from maslov_wave.wave import continue_in_eps, solve_pulse, trace_eps_branch


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--a", type=float, default=0.25)
    ap.add_argument("--start", type=float, default=5e-4)
    ap.add_argument("--out", default="fold_trace.csv")
    args = ap.parse_args()

    p = Params(a=args.a, eps=1e-4)
    start = solve_pulse(p)
    if args.start > 1e-4:
        start = continue_in_eps(p, [args.start], seed=start)[-1]
    trace = trace_eps_branch(start)
    write_csv(args.out, ["eps", "c", "v_max", "deps_ds"],
              [[pt.eps, pt.c, pt.v_max, pt.deps_ds] for pt in trace.points])
    print(f"fold at eps ~ {trace.fold_eps}" if trace.fold_eps else "no fold detected")


if __name__ == "__main__":
    main()
