"""Lowest- and highest-path distributions by three independent routes.

The finite n x n Gram determinant, the Nystrom Fredholm determinant and the
integrated Painleve system are compared on a grid of scaled thresholds.
"""

import argparse

import numpy as np

from excursions.fredholm import be_truncation, finite_det, fredholm_det_scalar, scalar_kernel
from excursions.painleve import prob_bottom, prob_top


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=3)
    args = parser.parse_args(argv)
    n = args.n
    s = np.arange(0.25, 3.01, 0.25)
    kern = scalar_kernel(n)
    bottom_p = prob_bottom(n, s)
    top_p = prob_top(n, s)
    print(f"n = {n}")
    print(f"{'s':>5} {'bottom finite':>14} {'nystrom':>10} {'painleve':>10} "
          f"{'top finite':>12} {'nystrom':>10} {'painleve':>10}")
    for i, si in enumerate(s):
        bf = finite_det(n, (0, si))
        bn = fredholm_det_scalar(kern, (0, si))
        tf = finite_det(n, (si, np.inf))
        tn = fredholm_det_scalar(kern, (si, np.inf), truncation_point=be_truncation(n))
        print(f"{si:5.2f} {bf:14.9f} {bn:10.7f} {bottom_p[i]:10.7f} "
              f"{tf:12.9f} {tn:10.7f} {top_p[i]:10.7f}")


if __name__ == "__main__":
    main()
