"""The visited-site functional E exp(-nu |R_t|) and its stretched decay.

The number of distinct sites a walk visits controls the relaxation rate of
the whole model. Plain Monte Carlo is reliable at moderate times and is
checked against the exact lumped-chain solver; at large times the solver
takes over and shows the local exponent of -log F(t) drifting down toward
d/(d+alpha) = 1/3, with the amplitude heading for the closed-form rate
constant.
"""

import numpy as np

from biased_voter import (dv_constant, effective_exponent,
                          exact_range_functional_curve_1d, lambda_nn,
                          make_nn_kernel, mc_range_functional)

nu = 1.0
kernel = make_nn_kernel(1)

print("== Monte Carlo vs exact at moderate times ==")
times = (5.0, 20.0, 50.0)
curve = mc_range_functional(kernel, nu, times, 200_000, seed=5)
exact_vals = exact_range_functional_curve_1d(nu, times, 120)
for j, t in enumerate(times):
    print(f"t={t:5.0f}: MC {curve.mean[j]:.6e} +- {curve.stderr[j]:.1e}   "
          f"exact {exact_vals[j]:.6e}   mean range {curve.mean_range[j]:.1f}")

print("\n== large times: exact solver only ==")
ts = np.geomspace(100.0, 2000.0, 13)
values = exact_range_functional_curve_1d(nu, ts, 400)
slopes = dict(effective_exponent(list(zip(ts, values))))
lam = lambda_nn(1)
c_ref = dv_constant(1, 2.0, lam, nu)
print(f"eigenvalue lambda = {lam:.5f}, rate constant c(nu=1) = {c_ref:.5f}")
print(f"{'t':>8} {'F(t)':>12} {'local exponent':>15} {'-log F / t^(1/3)':>17}")
for t, v in zip(ts, values):
    s = slopes.get(float(t))
    amp = -np.log(v) / t ** (1.0 / 3.0)
    print(f"{t:8.0f} {v:12.3e} {'' if s is None else f'{s:15.4f}'} {amp:17.4f}")
print("\nthe exponent column decreases toward 1/3 and the amplitude column "
      f"sits within a factor 2 of {c_ref:.3f}")
