"""Expected cost against |ab|^2 for each strategy and reset budget, written as CSV.

    python scripts/cost_sweep.py [--points 21] [--max-resets 4] [--out sweep.csv]
"""
import argparse
import csv
import math
import sys

from telereset import analysis as an
from telereset.protocol import Strategy, UnknownQubit


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=21)
    ap.add_argument("--max-resets", type=int, default=4)
    ap.add_argument("--out")
    args = ap.parse_args()

    out = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["weight_a", "ab_sq", "strategy", "max_resets", "h_t", "one_bit_prob",
                "completed_one_bit_prob", "expected_bits", "expected_copies", "abandon_prob"])
    for i in range(args.points):
        wa = 0.5 * i / (args.points - 1)
        phi = UnknownQubit(math.sqrt(1 - wa), math.sqrt(wa))
        for strategy in Strategy:
            budgets = [0] if strategy is Strategy.CONVENTIONAL else range(args.max_resets + 1)
            for k in budgets:
                s = an.cost_summary(phi, k, strategy)
                w.writerow([wa, phi.ab_sq, strategy.value, k, s.h_t, s.one_bit_prob,
                            s.completed_one_bit_prob, s.expected_bits, s.expected_copies, s.abandon_prob])
    if args.out:
        out.close()


if __name__ == "__main__":
    main()
