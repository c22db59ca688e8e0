"""How many studies can one dataset support?

For a range of subsample coefficients ``b`` this prints the per-study size,
the power to detect a small effect, the optimized correlation threshold and
the largest portfolio whose expected variance ratio stays within 1 + delta.

    python3 demos/capacity_planning.py [--N 10000] [--delta 0.1] [--d 0.2]
"""

import argparse
import warnings

from evr_lab import evr_planner
from evr_lab.rejection_calculus import Level


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=10_000)
    ap.add_argument("--delta", type=float, default=0.1)
    ap.add_argument("--d", type=float, default=0.2, help="effect size")
    ap.add_argument("--kappa", type=float, default=0.5)
    args = ap.parse_args()

    lv = Level(0.05)
    need = evr_planner.min_sample_size(args.d, lv, 0.99)
    print(f"N = {args.N}, delta = {args.delta}, 99% power needs {need} per arm\n")
    print(f"{'b':>4}{'n':>7}{'power':>9}{'rho0':>9}{'capacity':>10}")
    for b in (5, 10, 15, 20, 30, 50):
        spec = evr_planner.DesignSpec(args.N, 1, lv, "egalitarian", b=b, kappa=args.kappa)
        power = evr_planner.power_two_sample_t(evr_planner.PowerQuery(args.d, lv, spec.n_sub))
        with warnings.catch_warnings():
            # an underpowered subsample reports capacity 0 and says why
            warnings.simplefilter("ignore", RuntimeWarning)
            res = evr_planner.capacity(spec, args.delta, min_per_study=need)
        note = "  (too small)" if res.binding == "sample-size" else ""
        print(f"{b:>4}{spec.n_sub:>7}{power:>9.4f}{res.rho0_used:>9.4f}{res.max_studies:>10}{note}")

    split = evr_planner.capacity(evr_planner.DesignSpec(args.N, 1, lv, "splitting"), args.delta,
                                 min_per_study=need)
    print(f"\nsplitting with {need} per study: {split.max_studies} studies")


if __name__ == "__main__":
    main()
