"""Zero-perturbation distance versus grid spacing: the discretization floor and its order."""

import argparse

import numpy as np

from maslov_wave.core_dynamics import Params
from maslov_wave.pde import evolve, grid_for, zero_perturbation
from maslov_wave.wave import continue_in_eps, remesh, solve_pulse


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, default=5e-4)
    ap.add_argument("--dx", type=float, nargs="+", default=[0.2, 0.1, 0.05])
    ap.add_argument("--T", type=float, default=30.0)
    args = ap.parse_args()

    p = Params(eps=1e-4)
    prof = solve_pulse(p)
    if args.eps > 1e-4:
        prof = continue_in_eps(p, [args.eps], seed=prof)[-1]
    prof = remesh(prof, refine=1)
    floors = []
    for dx in args.dx:
        d = evolve(grid_for(prof, dx=dx), prof, zero_perturbation, args.T, n_out=10).d[-1]
        floors.append(d)
        print(f"dx={dx:<6g} floor={d:.3e}")
    if len(floors) > 1:
        orders = np.log(np.array(floors[:-1]) / floors[1:]) / np.log(np.array(args.dx[:-1]) / args.dx[1:])
        print("observed orders:", np.round(orders, 2))


if __name__ == "__main__":
    main()
