"""Monte Carlo estimates for two excursions next to the determinant values.

Smaller sample counts than the acceptance suite so the script runs in seconds.
"""

import argparse

from excursions import montecarlo as mc
from excursions.observables import bottom_cdf, joint_cdf, sigma


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args(argv)
    n = 2
    x = 0.3 * sigma(0.5)
    est = mc.estimate_bottom_cdf(n, 512, 0.5, [x], args.samples, args.seed)[0]
    print(f"P(X_1(0.5) >= 0.3 sigma): MC {est.estimate:.5f} +- {est.standard_error:.5f}, "
          f"determinant {bottom_cdf(n, 0.5, x):.5f}")
    times = (0.4, 0.6)
    thr = [0.3 * sigma(t) for t in times]
    joint = mc.estimate_joint(n, 520, times, thr, "bottom", args.samples, args.seed + 1)
    print(f"joint at tau = (0.4, 0.6): MC {joint.estimate:.5f} +- {joint.standard_error:.5f}, "
          f"determinant {joint_cdf(n, times, thr):.5f}")
    chi = mc.density_chi_square(n, 512, 0.5, args.samples, args.seed + 2)
    print(f"density chi-square: statistic {chi['statistic']:.1f}, p = {chi['pvalue']:.3f}")
    lo, hi = mc.estimate_areas(n, 256, args.samples // 10, args.seed + 3)
    print(f"areas: lowest {lo.estimate:.4f} +- {lo.standard_error:.4f}, "
          f"highest {hi.estimate:.4f} +- {hi.standard_error:.4f}")


if __name__ == "__main__":
    main()
