"""Recompute the headline numbers exactly and by sampling.

    python scripts/reproduce_claims.py [--trials N] [--seed S]
"""
import argparse
import math

from telereset import analysis as an
from telereset import montecarlo as mc
from telereset.protocol import ProtocolConfig, Strategy, UnknownQubit

R2 = 1 / math.sqrt(2)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    worked = UnknownQubit(1j * R2, (1 + 1j) / 2)
    plus = UnknownQubit(R2, R2)
    cases = [
        ("first reset succeeds", worked, ProtocolConfig(Strategy.RESET_RETRY, 1), "first_reset_success"),
        ("one bit with one reset", worked, ProtocolConfig(Strategy.RESET_RETRY, 1), "one_bit_prob"),
        ("cost with one reset", worked, ProtocolConfig(Strategy.RESET_RETRY, 1), "credited_bits"),
        ("|+> needs three resets", plus, ProtocolConfig(Strategy.RESET_RETRY, 3), "need_3_resets"),
        ("conventional bits", worked, ProtocolConfig(Strategy.CONVENTIONAL, 0), "mean_bits"),
    ]
    print(f"{'claim':28} {'exact':>10} {'sampled':>10} {'z':>7}")
    for name, phi, cfg, stat in cases:
        stats = mc.run_trials(mc.TrialConfig(args.trials, args.seed, phi, cfg))
        row = next(r for r in mc.compare(stats, phi, cfg).rows if r.statistic == stat)
        z = "exact" if row.z_score is None or row.stderr == 0 else f"{row.z_score:+.2f}"
        print(f"{name:28} {row.analytic:10.6f} {row.empirical:10.6f} {z:>7}")
    print(f"{'H(T) range':28} {an.entropy_ht(plus):.4f} .. {an.entropy_ht(UnknownQubit(1, 0)):.4f}")
    print(f"{'attempts after a reset':28} {an.expected_attempts_given_reset_success():10.6f}")


if __name__ == "__main__":
    main()
