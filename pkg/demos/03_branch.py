"""Continue the bifurcating branch of periodic domains for f = 1, n = 1.

Each point is a domain |x| < 1 + v_s(t / T_s) on which the Dirichlet
solution has constant normal derivative. Takes about half a minute.
Run with ``python3 demos/03_branch.py``.
"""

from onduloid import (BallGeometry, BranchSetup, Nonlinearity, branch_diagnostics,
                      certify_bifurcation, extend_branch, solve_ground_profile)

f, geom = Nonlinearity.constant(1.0), BallGeometry(1)
phi = solve_ground_profile(f, geom)
cert = certify_bifurcation(phi, f, geom)
print(cert.message, f"(T* = {cert.t_star:.8f}, dJ/dT = {cert.transversality:.6f})")

setup = BranchSetup.from_certificate(phi, f, geom, cert)
s = [0.01, 0.02, 0.03, 0.04, 0.05]
branch = extend_branch(setup, [-x for x in s] + [0.0] + s, K=8)

print(f"{'s':>7} {'T_s':>12} {'v_2':>12} {'flux':>12} {'flux dev':>9}")
for p in branch.points:
    v2 = p.v_s.coefficients[1] if p.K > 1 else 0.0
    print(f"{p.s:7.3f} {p.T_s:12.8f} {v2:12.4e} {p.flux_constant:12.8f} {p.flux_deviation:9.1e}")

diag = branch_diagnostics(branch)
print(f"remainder slope {diag.remainder_slope:.3f}, period slope {diag.period_slope:.3f}, "
      f"+/-s symmetry defect {diag.symmetry_defect:.1e}")
