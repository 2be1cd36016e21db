"""Ground state, ball spectra and the two threshold periods for f(u) = u^3 - u in the disc.

Run with ``python3 demos/01_ball_thresholds.py``.
"""

from onduloid import (BallGeometry, Nonlinearity, check_assumptions, dirichlet_spectrum,
                      find_t_star_by_root, robin_spectrum, solve_ground_profile, t_bar, t_star)

f, geom = Nonlinearity.power_minus_linear(3), BallGeometry(2)
phi = solve_ground_profile(f, geom)
print(f"phi_1(0) = {phi.center_value:.10f}   phi_1'(1) = {phi.d_at_1:.10f}   c = {phi.robin_c:g}")

# one negative Dirichlet eigenvalue, the rest positive
D = dirichlet_spectrum(phi, f, geom, k=4)
print("gamma_D:", D.eigenvalues.round(8), "  l =", D.negative_count)
print(check_assumptions(D).message)

R = robin_spectrum(phi, f, geom, phi.robin_c, k=3)
print("gamma (Robin):", R.eigenvalues.round(8))

tb, ts = t_bar(D.eigenvalues[0]), t_star(R.eigenvalues[0])
root = find_t_star_by_root(phi, f, geom, phi.robin_c, D.eigenvalues[0])
print(f"T_bar = {tb:.8f}   T* = {ts:.8f}   root of sigma_1 = {root:.8f}")
