"""sigma(T) for f = 1 in one dimension, against the closed form kappa tanh(kappa) - 1.

Run with ``python3 demos/02_sigma_curve.py``.
"""

import math

import numpy as np

from onduloid import BallGeometry, Nonlinearity, robin_spectrum, sigma_curve, solve_ground_profile, t_star

f, geom = Nonlinearity.constant(1.0), BallGeometry(1)
phi = solve_ground_profile(f, geom)
ts = t_star(robin_spectrum(phi, f, geom, phi.robin_c, k=2).eigenvalues[0])

T = np.linspace(2.0, 9.0, 15)
curve = sigma_curve(phi, f, geom, phi.robin_c, T, k_max=4)
print(f"T* = {ts:.8f}")
print(f"{'T':>8} {'sigma':>14} {'closed form':>14} {'k_min':>6}")
for t, s, k in zip(curve.T_values, curve.sigma_values, curve.minimizing_k):
    kap = 2 * math.pi / t
    print(f"{t:8.3f} {s:14.10f} {kap * math.tanh(kap) - 1:14.10f} {k:6d}")
print("sign change between", [(float(T[i]), float(T[i + 1])) for i in curve.sign_changes()])
