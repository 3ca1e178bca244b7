"""
Coverage study with noise-injected nuisances
============================================

True nuisances are perturbed on the logit scale with error of order
``n^-alpha``.  At ``alpha = 0.3`` the product of nuisance errors is
``o(n^-1/2)`` and intervals should cover; at ``alpha = 0.1`` they need not.
A reduced replicate count keeps this quick; the CLI ``table1`` command runs
the full 1000.
"""

from medpc import SimulationConfig, run

config = SimulationConfig(n_reps=200, truth_method="quadrature")
report = run(config)
print(report.to_text())

for rate in config.alpha_rates:
    for t in config.targets:
        r = report.row(t, rate)
        print(f"alpha={rate}  {t:5s}  empirical sd {r.emp_sd:.4f}  mean sandwich se {r.mean_se:.4f}")
