"""How the recovery threshold depends on where the nonzeros sit.

A signal of overall density rho is split over the two orthogonal blocks of
the dictionary with block densities rho1 = 2 mu rho / (1 + mu) and
rho2 = 2 rho / (1 + mu).  This script solves the replica fixed point along
a grid of mu and prints the critical density next to the value for a
rotationally invariant dictionary, which does not depend on mu.
"""
import numpy as np

from biortho.replica import solve_bi_orthogonal_threshold, solve_rot_invariant_threshold

rotinv = solve_rot_invariant_threshold()
print(f"rotationally invariant dictionary: rho_c = {rotinv.rho_critical:.12f}\n")
print(f"{'mu':>5} {'rho_c':>14} {'chi_hat_1':>10} {'chi_hat_2':>10} {'eta':>10}  iterations")
for mu in np.linspace(0, 1, 11):
    s = solve_bi_orthogonal_threshold(mu)
    print(f"{mu:5.2f} {s.rho_critical:14.12f} {s.chi_hat_1:10.6f} {s.chi_hat_2:10.6f} {s.eta:10.6f}  {s.iterations}")

# Concentrating the support in one block helps: at mu = 0 the threshold is
# well above the rotationally invariant one, and the advantage shrinks
# monotonically until the two coincide at uniform sparsity (mu = 1).
gain = solve_bi_orthogonal_threshold(0.0).rho_critical - rotinv.rho_critical
print(f"\nadvantage of full concentration over uniform sparsity: {gain:.5f}")
