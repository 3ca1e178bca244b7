"""Uncentered efficient-influence-function pseudo-outcomes.

For each observed record ``O = (X, A, M, Y)`` and nuisance values at ``X`` the
pseudo-outcome has conditional mean equal to the target curve at ``X`` when
the nuisances are correct, and its bias under wrong nuisances is second order
(products of errors).  All functions are vectorised over records.

The delta pseudo-outcome uses the product rule

    EIF[(mu01/mu11)(gamma0/gamma1)]
        = EIF[mu01/mu11] * gamma0/gamma1 + EIF[gamma0/gamma1] * mu01/mu11.

``variant="uncorrected"`` puts the mediator-ratio component in both slots,
for comparison with that form of the expansion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PositivityViolation
from .estimands import EPS_POS, NuisanceAt, identify_delta, identify_psi
from .world import ObservedData

TARGETS = ("psi", "delta", "zeta")


@dataclass
class PseudoOutcome:
    value: np.ndarray
    target: str
    components: dict = field(default_factory=dict)


def _check_cells(nu, cells, eps):
    for a, m in cells:
        p = np.asarray(nu.joint(a, m))
        if np.any(~(p >= eps)):
            raise PositivityViolation(f"P(A={a},M={m}|x)", np.nanmin(p), eps)


def _records(o):
    a = np.asarray(o.a, dtype=float)
    m = np.asarray(o.m, dtype=float)
    y = np.asarray(o.y, dtype=float)
    return a, m, y


def outcome_ratio_eif(o, nu: NuisanceAt, num, den=(1, 1)):
    """EIF of ``mu_num / mu_den`` evaluated at the record."""
    a, m, y = _records(o)
    an, mn = num
    ad, md = den
    ind_n = (a if an else 1 - a) * (m if mn else 1 - m)
    ind_d = (a if ad else 1 - a) * (m if md else 1 - m)
    mu_n, mu_d = nu.mu(an, mn), nu.mu(ad, md)
    return (1.0 / mu_d) * (ind_n * (y - mu_n) / nu.joint(an, mn)
                           - (mu_n / mu_d) * ind_d * (y - mu_d) / nu.joint(ad, md))


def mediator_ratio_eif(o, nu: NuisanceAt):
    """EIF of ``gamma0 / gamma1`` evaluated at the record."""
    a, m, _ = _records(o)
    g0, g1 = nu.gamma0, nu.gamma1
    return (1.0 / g1) * ((1 - a) * (m - g0) / (1.0 - nu.pi)
                         - (g0 / g1) * a * (m - g1) / nu.pi)


def phi_psi(o: ObservedData, nu: NuisanceAt, eps=EPS_POS) -> PseudoOutcome:
    """Pseudo-outcome for the probability of indirect causation."""
    _check_cells(nu, [(1, 0), (1, 1), (0, 0), (0, 1)], eps)
    phi1 = outcome_ratio_eif(o, nu, (1, 0))
    phi2 = mediator_ratio_eif(o, nu)
    phi3 = phi1 * (nu.gamma0 / nu.gamma1) + phi2 * (nu.mu10 / nu.mu11)
    plug = identify_psi(nu, eps)
    value = phi3 - phi1 - phi2 + plug
    return PseudoOutcome(value, "psi", {"phi1": phi1, "phi2": phi2, "phi3": phi3, "plugin": plug})


def phi_delta(o: ObservedData, nu: NuisanceAt, variant="corrected", eps=EPS_POS) -> PseudoOutcome:
    """Pseudo-outcome for the total mediated probability of causation."""
    if variant not in ("corrected", "uncorrected"):
        raise ValueError(f"unknown variant {variant!r}")
    _check_cells(nu, [(0, 0), (0, 1), (1, 1)], eps)
    _check_cells(nu, [(1, 0)], eps)  # P(A=1|x) enters the mediator ratio
    r_g = nu.gamma0 / nu.gamma1
    t1 = outcome_ratio_eif(o, nu, (0, 0))
    t2 = outcome_ratio_eif(o, nu, (0, 1))
    t3 = mediator_ratio_eif(o, nu)
    t4 = t1 * r_g + t3 * (nu.mu00 / nu.mu11)
    first = t2 if variant == "corrected" else t3
    t5 = first * r_g + t3 * (nu.mu01 / nu.mu11)
    plug = identify_delta(nu, eps)
    value = t4 - t5 - t1 + plug
    comps = {"tpc1": t1, "tpc2": t2, "tpc3": t3, "tpc4": t4, "tpc5": t5, "plugin": plug}
    return PseudoOutcome(value, "delta", comps)


def phi_zeta(o: ObservedData, nu: NuisanceAt, variant="corrected", eps=EPS_POS) -> PseudoOutcome:
    """Pseudo-outcome for the probability of direct causation (delta minus psi)."""
    d = phi_delta(o, nu, variant, eps)
    p = phi_psi(o, nu, eps)
    comps = {"delta": d.value, "psi": p.value}
    return PseudoOutcome(d.value - p.value, "zeta", comps)


def pseudo_outcome(o, nu, target, variant="corrected", eps=EPS_POS) -> PseudoOutcome:
    if target == "psi":
        return phi_psi(o, nu, eps)
    if target == "delta":
        return phi_delta(o, nu, variant, eps)
    if target == "zeta":
        return phi_zeta(o, nu, variant, eps)
    raise ValueError(f"unknown target {target!r}")


def expected_pseudo_outcome(truth: NuisanceAt, nu_hat: NuisanceAt, target,
                            variant="corrected"):
    """``E[phi(O; nu_hat) | X]`` when the data follow ``truth``.

    Sums the pseudo-outcome over the eight ``(a, m, y)`` cells weighted by
    their true conditional probabilities.  Used to measure the exact
    conditional bias of the pseudo-outcome without sampling noise in
    ``(A, M, Y)``.
    """
    total = 0.0
    for a in (0, 1):
        for m in (0, 1):
            p_am = truth.joint(a, m)
            for y in (0, 1):
                mu = truth.mu(a, m)
                w = p_am * (mu if y else 1.0 - mu)
                shape = np.shape(w)
                rec = ObservedData(None, np.full(shape, a), np.full(shape, m), np.full(shape, y))
                total = total + w * pseudo_outcome(rec, nu_hat, target, variant).value
    return total
