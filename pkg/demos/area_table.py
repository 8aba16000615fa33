"""Expected areas under the lowest and highest of n excursions, n = 1..9.

Prints the table together with sqrt(n) E(A_lowest) and the large-n
approximations built from c_L and c_H.
"""

import numpy as np

from excursions.observables import area_asymptotics, constant_cL, expected_areas


def main():
    c = constant_cL()
    print(f"c_L = {c.c_L:.7f}   c_H = {c.c_H:.12f}")
    print(f"{'n':>2} {'E A_low':>10} {'E A_high':>10} {'sqrt(n) E A_low':>16} {'large-n high':>13}")
    for n in range(1, 10):
        res = expected_areas(n)
        approx = area_asymptotics(n, "top", c)
        print(f"{n:>2} {res.bottom_mean:10.6f} {res.top_mean:10.6f} "
              f"{np.sqrt(n) * res.bottom_mean:16.6f} {approx:13.5f}")


if __name__ == "__main__":
    main()
