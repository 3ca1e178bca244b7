import numpy as np
import pytest
from scipy.special import expit

from medpc import (BadFoldCount, ConvergenceFailure, EmptySubset, NoiseSpec, PolynomialBasis,
                   TrueNuisance, assign_folds, crossfit_nuisance, fit_logit, perturb,
                   sample_observed, true_nuisance)
from medpc.estimands import NUISANCE_NAMES
from medpc.nuisance import CLAMP, ShiftedNuisance
from medpc.world import ObservedData


class TestNoise:
    def test_scale(self):
        s = NoiseSpec(0.3, 1000)
        assert s.mean("pi") == pytest.approx(0.125893, abs=1e-6)
        assert s.sd("mu11") == pytest.approx(0.125893, abs=1e-6)

    def test_per_component_constants(self):
        c = {k: 2.0 for k in NUISANCE_NAMES}
        s = NoiseSpec(0.5, 100, c1=c, c2=c)
        assert s.mean("gamma0") == pytest.approx(0.2)
        assert s.sd("gamma0") == pytest.approx(np.sqrt(2) / 10)

    def test_zero_noise_is_identity(self, spec):
        x = np.linspace(0, 1, 101)
        truth = TrueNuisance(spec)
        noisy = perturb(truth, NoiseSpec(0.3, 1000, 0.0, 0.0), seed=1)(x)
        for k, v in truth(x).as_dict().items():
            np.testing.assert_array_equal(getattr(noisy, k), v)

    def test_reproducible_and_independent(self, spec):
        x = np.linspace(0, 1, 1000)
        model = perturb(TrueNuisance(spec), NoiseSpec(0.3, 1000), seed=9)
        a, b = model(x), model(x)
        for k in NUISANCE_NAMES:
            np.testing.assert_array_equal(getattr(a, k), getattr(b, k))
        e1 = model.draws("gamma0", 10_000)
        e2 = model.draws("gamma1", 10_000)
        assert abs(np.corrcoef(e1, e2)[0, 1]) < 0.05

    def test_function_mode_single_shift(self, spec):
        model = perturb(TrueNuisance(spec), NoiseSpec(0.3, 1000, mode="function"), seed=2)
        e = model.draws("mu10", 50)
        assert np.all(e == e[0])

    @pytest.mark.parametrize("alpha", [0.3, 0.1])
    def test_rate_recovery(self, spec, alpha):
        x = np.random.default_rng(0).random(100_000)
        truth = TrueNuisance(spec)
        ns = np.array([1e3, 1e4, 1e5])
        errs = []
        for n in ns:
            hat = perturb(truth, NoiseSpec(alpha, int(n)), seed=3)(x)
            errs.append(np.sqrt(np.mean((hat.gamma1 - truth(x).gamma1) ** 2)))
        slope = np.polyfit(np.log(ns), np.log(errs), 1)[0]
        assert abs(slope + alpha) < 0.02

    def test_clamped(self, spec):
        model = perturb(TrueNuisance(spec), NoiseSpec(0.01, 2, c1=20.0, c2=100.0), seed=4)
        nu = model(np.linspace(0, 1, 10_000))
        for k in NUISANCE_NAMES:
            v = getattr(nu, k)
            assert v.min() >= CLAMP and v.max() <= 1 - CLAMP
        cells = [nu.joint(a, m) for a in (0, 1) for m in (0, 1)]
        assert all(np.all(c > 0) for c in cells)
        np.testing.assert_allclose(sum(cells), 1.0, atol=1e-12)

    def test_shift(self, spec):
        x = np.array([0.2, 0.7])
        nu = ShiftedNuisance(TrueNuisance(spec), {"mu11": 0.1})(x)
        t = true_nuisance(spec, x)
        np.testing.assert_allclose(nu.mu11, expit(np.log(t.mu11 / (1 - t.mu11)) + 0.1))
        np.testing.assert_array_equal(nu.mu10, t.mu10)


def _logistic_data(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.random(n)
    y = (rng.random(n) < expit(0.5 + 2 * x)).astype(np.int8)
    return ObservedData(x, np.ones(n, np.int8), np.ones(n, np.int8), y)


class TestFitLogit:
    def test_self_consistency(self):
        fit = fit_logit(_logistic_data(5000, 1), PolynomialBasis(1), "mu11")
        se = np.sqrt(np.diag(fit.cov))
        assert np.all(np.abs(fit.coef - [0.5, 2.0]) < 3 * se)

    def test_matches_scipy_optimum(self):
        from scipy.optimize import minimize

        d = _logistic_data(2000, 2)
        B = PolynomialBasis(1)(d.x)
        y = d.y.astype(float)

        def nll(b):
            eta = B @ b
            return -np.sum(y * eta - np.logaddexp(0, eta))

        ref = minimize(nll, np.zeros(2), method="BFGS", options={"gtol": 1e-10}).x
        fit = fit_logit(d, PolynomialBasis(1), "mu11")
        np.testing.assert_allclose(fit.coef, ref, atol=1e-5)

    def test_separation_never_nonfinite(self):
        d = _logistic_data(200, 3)
        d = ObservedData(d.x, d.a, d.m, np.ones_like(d.y))
        try:
            fit = fit_logit(d, PolynomialBasis(1), "mu11")
        except ConvergenceFailure:
            return
        out = fit(np.linspace(0, 1, 11))
        assert np.all(np.isfinite(out)) and out.max() <= 1 - CLAMP

    def test_empty_subset(self, spec):
        d = sample_observed(spec, 100, 1)
        with pytest.raises(EmptySubset):
            fit_logit(d, PolynomialBasis(1), "mu11", subset=lambda a, m: np.zeros_like(a, bool))

    def test_default_subset(self, spec):
        d = sample_observed(spec, 5000, 1)
        fit = fit_logit(d, PolynomialBasis(0), "gamma0")
        sel = d.a == 0
        assert expit(fit.coef[0]) == pytest.approx(np.mean(d.m[sel]), abs=1e-9)

    def test_consistency(self, spec):
        d = sample_observed(spec, 400_000, 8)
        fit = fit_logit(d, PolynomialBasis(3), "gamma1")
        grid = np.linspace(0.05, 0.95, 91)
        assert np.max(np.abs(fit(grid) - true_nuisance(spec, grid).gamma1)) < 0.02


class TestFolds:
    def test_even(self):
        lab = assign_folds(10, 2, 0)
        assert sorted(np.bincount(lab)) == [5, 5]

    def test_odd(self):
        assert sorted(np.bincount(assign_folds(11, 2, 0))) == [5, 6]

    def test_deterministic(self):
        np.testing.assert_array_equal(assign_folds(100, 3, 5), assign_folds(100, 3, 5))

    @pytest.mark.parametrize("n,k", [(3, 2), (10, 1)])
    def test_bad(self, n, k):
        with pytest.raises(BadFoldCount):
            assign_folds(n, k, 0)

    def test_crossfit_discipline(self, spec):
        d = sample_observed(spec, 3000, 6)
        cf = crossfit_nuisance(d, PolynomialBasis(1), k=2, seed=1)
        for f, model in enumerate(cf.models):
            held = cf.folds == f
            assert model.fold == f
            assert model.fits["pi"].n == int((~held).sum())
            nu = model(d.x[held])
            np.testing.assert_array_equal(cf.nuisance.mu11[held], nu.mu11)
