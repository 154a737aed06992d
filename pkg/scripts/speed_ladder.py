"""Pulse speed versus eps: continuation up the branch, log-log slope of |c - c*|."""

import argparse
import json

import numpy as np

from maslov_wave.core_dynamics import Params
from maslov_wave.io import write_json
from maslov_wave.wave import continue_in_eps, solve_pulse


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--a", type=float, default=0.25)
    ap.add_argument("--eps", type=float, nargs="+", default=[1e-4, 2e-4, 5e-4, 8e-4, 1e-3])
    ap.add_argument("--out", default="speed_ladder.json")
    args = ap.parse_args()

    eps = sorted(args.eps)
    p = Params(a=args.a, eps=eps[0])
    profiles, failure = [solve_pulse(p)], None
    try:
        profiles += continue_in_eps(p, eps[1:], seed=profiles[0])
    except RuntimeError as err:
        failure = str(err)
    rows = [{"eps": pr.eps, "c": pr.c, "gap": abs(pr.c - p.c_star)} for pr in profiles]
    slope = None
    if len(rows) > 1:
        slope = float(np.polyfit(np.log([r["eps"] for r in rows]), np.log([r["gap"] for r in rows]), 1)[0])
    write_json(args.out, {"c_star": p.c_star, "rows": rows, "loglog_slope": slope, "failure": failure})
    print(json.dumps({"slope": slope, "solved": [r["eps"] for r in rows], "failure": failure}))


if __name__ == "__main__":
    main()
