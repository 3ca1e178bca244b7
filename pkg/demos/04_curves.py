"""
Nuisance, estimand and projection curves
========================================

Tabulates the curves and their best linear approximations.  Plotting is left
to the reader; the CLI ``figures`` command writes the same tables as CSV.
"""

import numpy as np

from medpc import DgpSpec, curve_sweep

curves = curve_sweep(DgpSpec(), np.linspace(0, 1, 11))
est = curves["estimands"]
proj = curves["projections"]

print("   x   pc_med     psi  psi_lin   delta  dlt_lin    zeta")
for i, x in enumerate(est["x"]):
    print(f"{x:4.1f}  {est['pc_mediator'][i]:7.4f} {est['psi'][i]:7.4f} {proj['psi_proj'][i]:8.4f}"
          f" {est['delta'][i]:7.4f} {proj['delta_proj'][i]:8.4f} {est['zeta'][i]:7.4f}")

for t, beta in curves["coefficients"].items():
    print(f"{t}: intercept {beta[0]:.4f}, slope {beta[1]:.4f}")
print("psi exceeds one half from x =", curves["psi_crossing"])
