import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from medpc import (NuisanceAt, TrueNuisance, expected_pseudo_outcome, identify_all,
                   phi_delta, phi_psi, phi_zeta, pseudo_outcome, sample_observed,
                   true_nuisance)
from medpc.eif import mediator_ratio_eif, outcome_ratio_eif
from medpc.estimands import identify
from medpc.nuisance import ShiftedNuisance
from medpc.world import ObservedData

from conftest import monotone_nuisance


def rec(a, m, y):
    return ObservedData(np.array([0.5]), np.array([a]), np.array([m]), np.array([y]))


class TestComponents:
    def test_outcome_ratio(self):
        # joint P(A=1, M=0 | x) = pi (1 - gamma1) = 0.5 * 0.5
        nu = NuisanceAt(pi=0.5, gamma0=0.3, gamma1=0.5, mu00=0.3, mu01=0.3, mu10=0.5, mu11=0.8)
        assert nu.joint(1, 0) == 0.25
        phi1 = outcome_ratio_eif(rec(1, 0, 1), nu, (1, 0))
        assert phi1[0] == pytest.approx(2.5)

    def test_mediator_ratio(self):
        nu = NuisanceAt(pi=0.5, gamma0=0.4, gamma1=0.8, mu00=0.3, mu01=0.3, mu10=0.5, mu11=0.8)
        phi2 = mediator_ratio_eif(rec(0, 1, 0), nu)
        assert phi2[0] == pytest.approx(1.5)

    def test_exposed_mediated_record(self):
        nu = NuisanceAt(pi=0.4, gamma0=0.3, gamma1=0.6, mu00=0.3, mu01=0.2, mu10=0.2, mu11=0.8)
        t1 = phi_delta(rec(1, 1, 1), nu).components["tpc1"]
        # only the mu11 residual term survives
        expected = -(1 / 0.8) * (0.3 / 0.8) * (1 - 0.8) / (0.4 * 0.6)
        assert t1[0] == pytest.approx(expected)


class TestVariants:
    def test_differ_only_in_tpc5(self, spec):
        d = sample_observed(spec, 500, 1)
        nu = TrueNuisance(spec)(d.x)
        c = phi_delta(d, nu, "corrected").components
        u = phi_delta(d, nu, "uncorrected").components
        for k in ("tpc1", "tpc2", "tpc3", "tpc4"):
            np.testing.assert_array_equal(c[k], u[k])
        assert not np.allclose(c["tpc5"], u["tpc5"])

    def test_unknown_variant(self, spec):
        d = sample_observed(spec, 10, 1)
        with pytest.raises(ValueError):
            phi_delta(d, TrueNuisance(spec)(d.x), "other")


@given(monotone_nuisance(), st.integers(0, 1), st.integers(0, 1), st.integers(0, 1))
def test_zeta_is_difference(nu, a, m, y):
    o = rec(a, m, y)
    assert phi_zeta(o, nu).value[0] == phi_delta(o, nu).value[0] - phi_psi(o, nu).value[0]


@given(monotone_nuisance())
def test_conditional_mean_at_truth_is_exact(nu):
    ev = identify_all(nu)
    for target in ("psi", "delta", "zeta"):
        got = expected_pseudo_outcome(nu, nu, target)
        assert got == pytest.approx(getattr(ev, target), abs=1e-10)


def test_uncorrected_conditional_mean_at_truth(spec):
    # the two tpc5 forms differ only by terms with zero conditional mean at the truth
    x = np.linspace(0, 1, 51)
    nu = true_nuisance(spec, x)
    got = expected_pseudo_outcome(nu, nu, "delta", "uncorrected")
    np.testing.assert_allclose(got, identify_all(nu).delta, atol=1e-12)


def test_corrected_is_exact_under_single_ratio_error(spec):
    # wrong mu01 alone enters the corrected form linearly, so the bias vanishes
    x = np.linspace(0.05, 0.95, 19)
    truth = true_nuisance(spec, x)
    wrong = truth.replace(mu01=truth.mu01 * 1.2)
    ev = identify_all(truth).delta
    corr = expected_pseudo_outcome(truth, wrong, "delta", "corrected")
    unc = expected_pseudo_outcome(truth, wrong, "delta", "uncorrected")
    np.testing.assert_allclose(corr, ev, atol=1e-12)
    assert np.max(np.abs(unc - ev)) > 1e-3


@pytest.fixture(scope="module")
def big(spec):
    d = sample_observed(spec, 2_000_000, 21)
    return d, TrueNuisance(spec)(d.x)


def test_binned_conditional_unbiasedness(big, spec):
    d, nu = big
    phi = phi_psi(d, nu).value
    psi = identify_all(nu).psi
    idx = np.minimum((d.x * 20).astype(int), 19)
    for b in range(20):
        sel = idx == b
        diff = phi[sel] - psi[sel]
        se = diff.std(ddof=1) / math.sqrt(sel.sum())
        assert abs(diff.mean()) < 4 * se, b


def test_finite_over_clamped_records(big):
    d, _ = big
    n = 1_000_000
    rng = np.random.default_rng(0)
    # extreme but clamped nuisances
    vals = rng.choice([1e-3, 0.5, 1 - 1e-3], size=(7, n))
    nu = NuisanceAt(*vals)
    sub = d.subset(slice(0, n))
    for target in ("psi", "delta", "zeta"):
        assert np.all(np.isfinite(pseudo_outcome(sub, nu, target).value))


@pytest.mark.parametrize("name", ["mu11", "gamma1"])
def test_shift_bias_scaling_closed_form(spec, name):
    # a logit shift moves 1/p by ((1 - p)/p)(1 - exp(-eps)), so the plug-in bias
    # scales with (1 - exp(-eps)) and the pseudo-outcome bias with its square
    truth = TrueNuisance(spec)
    x = np.linspace(0.01, 0.99, 99)
    nu = truth(x)
    theta = identify(nu, "psi")
    dr, plug = {}, {}
    for eps in (0.05, 0.1):
        hat = ShiftedNuisance(truth, {name: eps})(x)
        dr[eps] = np.mean(expected_pseudo_outcome(nu, hat, "psi") - theta)
        plug[eps] = np.mean(identify(hat, "psi") - theta)
    factor = 1 + math.exp(-0.05)
    assert plug[0.1] / plug[0.05] == pytest.approx(factor, rel=1e-9)
    assert dr[0.1] / dr[0.05] == pytest.approx(factor**2, rel=1e-9)
