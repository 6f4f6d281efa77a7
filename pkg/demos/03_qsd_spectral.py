"""Quasi-stationary law and survival rate by sparse eigensolve.

Conditioned on not being extinct, the process settles into a
quasi-stationary law; absorption from that law is exponential with rate
lambda.  The law solves an eigenproblem for the generator restricted to
the living states, discretized here with an upwind finite-volume scheme
whose grid places every nutrient equilibrium y_n on a cell face.
"""
import numpy as np

from chemostat_qsd import table
from chemostat_qsd.qsd_spectral import qsd, structural_checks
from chemostat_qsd.verification import desk_params


def main():
    params = desk_params()
    est = qsd(params, m_cells=512, n_max=50)
    print(f"survival rate lambda = {est.lam:.8f}  "
          f"(residual {est.residual:.2e})")
    print(f"mean population size under the law: {est.mean_n():.4f}")

    print("\ncount marginal kappa_n:")
    for n in range(1, 9):
        bar = "#" * int(60 * est.kappa[n - 1])
        print(f"  n = {n}: {est.kappa[n - 1]:.5f} |{bar}")
    print(f"  tail (n > 8): {est.kappa[8:].sum():.5f}")

    # the nutrient marginal, coarse-grained for display
    y = est.disc.centers
    w = est.disc.widths
    u = est.marginal_y()
    edges = np.linspace(0.0, est.disc.y_grid[-1], 25)
    masses = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        m = (y >= lo) & (y < hi)
        masses.append((u[m] * w[m]).sum() if m.any() else 0.0)
    print("\nnutrient marginal (mass per coarse bin; the density grows "
          "toward y_1):")
    for lo, hi, mass in zip(edges[:-1], edges[1:], masses):
        bar = int(60 * mass / max(masses))
        print(f"  [{lo:.3f}, {hi:.3f}) |{'#' * bar}")

    # the rate sits below the flow bound at the equilibria
    tab = table(params, 60)
    bound = min(n * (params.b(yy) + params.D + params.d(yy))
                for n, yy in tab.roots if n >= 1)
    print(f"\nupper bound inf_n n (b(y_n) + D + d(y_n)) = {bound:.4f}")
    print(f"lambda = {est.lam:.4f} < {bound:.4f}: "
          f"{'ok' if est.lam < bound else 'VIOLATED'}")

    # structure: positive density between equilibria, no atom at any y_n
    rep = structural_checks(est, tab)
    print(f"\npositivity between equilibria: {rep['positivity_ok']}")
    print(f"no mass concentration at the y_n: {rep['no_atom_ok']}")
    print(f"mass above y_1 (should be ~0): {rep['mass_above_y1']:.2e}")


if __name__ == "__main__":
    main()
