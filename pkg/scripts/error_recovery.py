"""Inject known verifier error rates on the long-multiplication task and
estimate them back from episode records.

For each (e-, e+) pair on a small grid: run noisy-policy episodes under a
retry-in-place engine whose verifier flips verdicts at the injected rates,
then compare first-attempt verdicts against the clean rule verifier.

    python3 scripts/error_recovery.py --episodes 2000
"""

import argparse

from reflect_lab import rng as rng_mod
from reflect_lab.engines import ReflectConfig, run_rmtp
from reflect_lab.metrics import estimate_verification_errors
from reflect_lab.mtp import DifficultyTier, SelfVerifying, TaskName
from reflect_lab.tasks import (
    binary_verifier,
    expert_policy,
    gen_query,
    make_noisy_policy,
    make_noisy_verifier,
    transition_for,
)

GRID = ((0.05, 0.05), (0.2, 0.1), (0.1, 0.3), (0.4, 0.2))


def recover(e_minus, e_plus, episodes, noise, seed):
    policy = make_noisy_policy(expert_policy(TaskName.MULT), noise)
    rule = binary_verifier(TaskName.MULT).rule
    verifier = make_noisy_verifier(binary_verifier(TaskName.MULT), e_minus, e_plus)
    bundle = SelfVerifying(policy, verifier)
    transition = transition_for(TaskName.MULT)
    config = ReflectConfig(reflective_budget=512, total_budget=512)
    records = []
    for i in range(episodes):
        rng = rng_mod.stream(seed, i)
        tier = (DifficultyTier.ID_EASY, DifficultyTier.ID_HARD)[i % 2]
        q = gen_query(TaskName.MULT, tier, rng)
        records.append(run_rmtp(bundle, transition, q, config, rng))
    return estimate_verification_errors(
        records, lambda query, state, step: not rule(state, step).rejected
    )


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--episodes", type=int, default=2000)
    p.add_argument("--noise", type=float, default=0.3,
                   help="policy corruption probability")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    print(f"{'injected':>14s} {'estimated':>17s} {'first attempts':>15s}")
    for gi, (e_minus, e_plus) in enumerate(GRID):
        est = recover(
            e_minus, e_plus, args.episodes, args.noise,
            rng_mod.derive_key(args.seed, gi)[1],
        )
        print(
            f"  ({e_minus:.2f}, {e_plus:.2f}) -> "
            f"({est.e_minus_hat:.4f}, {est.e_plus_hat:.4f}) "
            f"{est.n_first_attempts:>12d}"
        )


if __name__ == "__main__":
    main()
