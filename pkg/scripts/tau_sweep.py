"""Maslov ledger for several reference levels u_tau; the total should not depend on the choice."""

import argparse

from maslov_wave.core_dynamics import Params
from maslov_wave.maslov import compute_maslov
from maslov_wave.wave import solve_pulse


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, default=1e-4)
    ap.add_argument("--u-tau", type=float, nargs="+", default=[-0.0025, -0.005, -0.01, -0.02, -0.05])
    args = ap.parse_args()

    prof = solve_pulse(Params(eps=args.eps))
    print(f"c = {prof.c:.8f}")
    for ut in args.u_tau:
        led = compute_maslov(prof, u_tau=ut)
        print(f"u_tau={ut:+.4f}  tau={led.tau:9.2f}  signs={led.signs}  n_+={led.n_plus}  total={led.total}")


if __name__ == "__main__":
    main()
