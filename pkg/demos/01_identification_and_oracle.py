"""
Identified estimands versus exact counterfactual enumeration
============================================================

The default design couples potential mediators and outcomes monotonically.
Here we evaluate the identifying formulas on the observed-data nuisances and
compare them with probabilities computed directly from the 64 latent states.
"""

import dataclasses

import numpy as np

from medpc import DgpSpec, identify_all, oracle_estimands, true_nuisance

spec = DgpSpec()

# nuisances at a few covariate values
for x in (0.0, 0.5, 1.0):
    nu = true_nuisance(spec, x)
    print(f"x={x:.1f}  " + "  ".join(f"{k}={float(v):.4f}" for k, v in nu.as_dict().items()))

# identified curves on a grid
grid = np.linspace(0, 1, 11)
ev = identify_all(true_nuisance(spec, grid))
print("\n   x     psi   delta    zeta     tau      xi")
for row in zip(grid, ev.psi, ev.delta, ev.zeta, ev.tau, ev.xi):
    print("  ".join(f"{v:6.4f}" for v in row))

# enumeration oracle agrees to rounding error
worst = max(abs(float(identify_all(true_nuisance(spec, x)).psi) - oracle_estimands(spec, x).psi)
            for x in grid)
print(f"\nmax |identified psi - oracle psi| = {worst:.1e}")

# without the monotone coupling the formulas no longer recover the truth
loose = dataclasses.replace(spec, enforce_monotonicity=False)
gap = max(abs(float(identify_all(true_nuisance(loose, x)).psi) - oracle_estimands(loose, x).psi)
          for x in grid)
print(f"independent draws: max gap = {gap:.3f}")
