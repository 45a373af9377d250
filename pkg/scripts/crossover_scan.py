"""Where does width-m backtracking overtake retry-in-place?

Scans problem scale for the first n where the backtracking curve pulls
ahead, across a range of verifier informativeness values f, confirming
each crossover by Monte-Carlo.  Backtracking pays a constant-factor tax at
small n and wins asymptotically only when f is large enough; this makes
the trade visible.

    python3 scripts/crossover_scan.py --m 4
"""

import argparse

from reflect_lab.sim import crossover_scan
from reflect_lab.theory import (
    SimplifiedParams,
    derived_rates,
    rtbs_asymptotically_beats_rmtp,
)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--mu", type=float, default=0.8)
    p.add_argument("--e-minus", dest="e_minus", type=float, default=0.3)
    p.add_argument("--e-plus", dest="e_plus", type=float, default=0.2)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--f-values", type=float, nargs="+",
                   default=[0.3, 0.5, 0.7, 0.8, 0.9])
    p.add_argument("--n-max", type=int, default=200)
    p.add_argument("--episodes", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    print(f"width m={args.m}, scanning n=1..{args.n_max}")
    for f in args.f_values:
        params = SimplifiedParams(
            mu=args.mu, e_minus=args.e_minus, e_plus=args.e_plus, f=f
        )
        alpha = derived_rates(params).alpha
        wins = rtbs_asymptotically_beats_rmtp(params, args.m)
        result = crossover_scan(
            params, args.m, args.n_max, args.episodes, args.seed
        )
        if result.n_star is None:
            print(
                f"  f={f:.2f} alpha={alpha:.3f} predicted win={wins}: "
                f"no crossover by n={args.n_max}"
            )
            continue
        confirm = ""
        if result.mc_rtbs is not None:
            confirm = (
                f"; MC at n={result.checked_n} "
                f"({'confirmed' if result.mc_confirmed else 'NOT confirmed'}): "
                f"backtracking {result.mc_rtbs.accuracy_hat:.4f} "
                f"vs retry {result.mc_rmtp.accuracy_hat:.4f}"
            )
        print(
            f"  f={f:.2f} alpha={alpha:.3f} predicted win={wins}: "
            f"crossover at n={result.n_star}{confirm}"
        )


if __name__ == "__main__":
    main()
