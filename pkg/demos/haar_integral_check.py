"""The large-M Haar sphere integral against its finite-M value.

For u1, u2 independent and uniform on spheres of squared radius M r1 and
M r2, M^-1 log E exp(c u1.u2) tends to a closed form F(r1, r2, c).  The
finite-M value reduces to a one-dimensional integral over the cosine of
the angle between u1 and u2, which we evaluate by quadrature.  The gap
closes like 1/M.
"""
from biortho.haarint import f_haar, f_haar_asymptotic, i_m_quadrature

r1, r2, c = 1.0, 2.0, 1.5
limit = f_haar(r1, r2, c)
print(f"F({r1}, {r2}, {c}) = {limit:.10f}\n")
print(f"{'M':>7} {'finite M':>14} {'gap':>11} {'M * gap':>9}")
for M in (10, 50, 100, 400, 1600, 6400, 25600):
    val = i_m_quadrature(M, r1, r2, c)
    print(f"{M:7d} {val:14.10f} {val - limit:11.3e} {M * (val - limit):9.4f}")

# for strong coupling the closed form approaches sqrt(g) - log(g)/4, g = c^2 r1 r2
print(f"\n{'c':>6} {'F':>12} {'asymptotic':>12} {'relative gap':>13}")
for c in (1, 10, 100, 1000):
    f, a = f_haar(1, 1, c), f_haar_asymptotic(1, 1, c)
    print(f"{c:6d} {f:12.4f} {a:12.4f} {abs(f - a) / f:13.2e}")
