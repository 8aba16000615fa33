"""Convergence of the rescaled lowest path to the Bessel scaling limit."""

from excursions.kernels import BesselTimePartition
from excursions.observables import bessel_scaling_error, joint_limit_check


def main():
    ns = (8, 16, 32, 64, 128)
    res = joint_limit_check(BesselTimePartition((0.0,)), [2.0], ns)
    print(f"Bessel gap probability at s = 2: {res['bessel']:.8f}")
    print(f"{'n':>4} {'kernel sup error':>17} {'determinant':>12} {'gap':>10}")
    for n, row in zip(ns, res["rows"]):
        print(f"{n:>4} {bessel_scaling_error(n):17.3e} {row['value']:12.8f} "
              f"{row['difference']:10.2e}")


if __name__ == "__main__":
    main()
