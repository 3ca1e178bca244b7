"""
Estimation from data with cross-fitted logistic nuisances
=========================================================

Simulate a sample, fit the seven nuisances by cubic logistic regression with
two-fold cross-fitting, and project each pseudo-outcome onto ``{1, x}``.
"""

import numpy as np

from medpc import (DgpSpec, PolynomialBasis, ProjectionModel, crossfit_nuisance,
                   predict_ci, quadrature_projection, sample_observed, solve)

spec = DgpSpec()
data = sample_observed(spec, 4000, seed=1)
cf = crossfit_nuisance(data, PolynomialBasis(3), k=2, seed=1)

x_eval = np.array([0.25, 0.5, 0.75])
for target in ("psi", "delta", "zeta"):
    model = ProjectionModel(target=target)
    fit = solve(data, model, cf.nuisance, k_folds=2)
    est, lo, hi = predict_ci(fit, model, x_eval)
    truth = model.predict(x_eval, quadrature_projection(spec, model))
    print(target)
    for x, e, l, h, t in zip(x_eval, est, lo, hi, truth):
        print(f"  x={x:.2f}  estimate {e:.3f}  95% CI [{l:.3f}, {h:.3f}]  projection truth {t:.3f}")
