"""Can Alice bias Bob's reading without talking to him?

Sweeps |a|^2 and reports Bob's P(0) over all rounds and over the rounds Alice
keeps, exactly and by sampling.

    python scripts/bias_attack.py [--trials N] [--seed S] [--max-resets K]
"""
import argparse
import math

from telereset import analysis as an
from telereset import montecarlo as mc
from telereset.protocol import ProtocolConfig, Strategy, UnknownQubit


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--max-resets", type=int, default=1)
    args = ap.parse_args()

    cfg = ProtocolConfig(Strategy.RESET_RETRY, args.max_resets)
    print(f"{'|a|^2':>6} {'all rounds':>22} {'kept rounds':>22} {'kept':>7}")
    for wa in (0.5, 0.6, 0.75, 0.9, 0.99):
        phi = UnknownQubit(math.sqrt(wa), math.sqrt(1 - wa))
        b = mc.run_bias_trials(mc.TrialConfig(args.trials, args.seed, phi, cfg))
        exact_all = an.bob_marginal(phi, cfg.max_resets, "unconditioned")
        exact_kept = an.bob_marginal(phi, cfg.max_resets, "post-selected")
        print(f"{wa:6.2f} {exact_all:10.6f} / {b.unconditioned_bob_p0:9.6f} "
              f"{exact_kept:10.6f} / {b.post_selected_bob_p0:9.6f} {b.keep_fraction:7.4f}")
    print("Bob's unconditioned statistics stay at 1/2; only post-selected rounds move.")


if __name__ == "__main__":
    main()
