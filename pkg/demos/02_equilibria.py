"""Tabulate the nutrient equilibria y_n and their asymptotics.

With n individuals present, the nutrient drifts toward the root y_n of
G_n(y) = D (y_star - y) - n b_tilde(y).  The roots decrease in n and
accumulate at 0; the per-capita consumption n b(y_n) approaches the
total inflow D y_star R.  With a maintenance drain (eta > 0) the roots
disappear beyond a finite threshold count.
"""
import numpy as np

from chemostat_qsd import BirthLaw, ChemostatParams, DeathLaw, root, table
from chemostat_qsd.verification import desk_params


def main():
    params = desk_params()
    tab = table(params, 12)
    print("equilibria for the reference model:")
    print(f"  {'n':>4s} {'y_n':>12s} {'n b(y_n)':>12s}")
    for n, y in tab.roots:
        print(f"  {n:4d} {y:12.8f} {n * params.b(y):12.8f}")
    print(f"  total inflow D y_star R = {params.D * params.y_star * params.R}")

    # y_1 has a closed form here: G_1 = 0 reduces to y^2 + 5y - 1 = 0
    y1 = root(params, 1)
    exact = (np.sqrt(29.0) - 5.0) / 2.0
    print(f"\ny_1 = {y1:.15f}")
    print(f"closed form (sqrt(29) - 5)/2 = {exact:.15f}")
    print(f"difference {abs(y1 - exact):.2e}")

    # accumulation at zero
    big = table(params, 1000)
    print(f"\ny_100  = {big.y(100):.6e}")
    print(f"y_1000 = {big.y(1000):.6e}  (roots accumulate at 0)")

    # with a maintenance drain the table truncates
    drained = ChemostatParams(D=1.0, y_star=1.0, R=1.0, eta=0.4,
                              birth=BirthLaw.monod(5.0, 1.0),
                              death=DeathLaw.constant(1.0))
    dt = table(drained, 10)
    print(f"\nwith eta = 0.4: roots exist only for n <= "
          f"{dt.n_max_with_root} (threshold count n0 = {dt.n0})")


if __name__ == "__main__":
    main()
