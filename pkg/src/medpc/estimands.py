"""Identified mediated probabilities of causation as functions of nuisance values.

Every function accepts scalars or numpy arrays (evaluated elementwise over
covariate points) and is pure.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import PositivityViolation

EPS_POS = 1e-6

NUISANCE_NAMES = ("pi", "gamma0", "gamma1", "mu00", "mu01", "mu10", "mu11")


@dataclass(frozen=True)
class NuisanceAt:
    """Conditional probabilities at one or many covariate points.

    Attributes
    ----------
    pi : P(A=1 | X=x)
    gamma0, gamma1 : P(M=1 | A=a, X=x)
    mu00, mu01, mu10, mu11 : P(Y=1 | A=a, M=m, X=x)
    """

    pi: np.ndarray | float
    gamma0: np.ndarray | float
    gamma1: np.ndarray | float
    mu00: np.ndarray | float
    mu01: np.ndarray | float
    mu10: np.ndarray | float
    mu11: np.ndarray | float

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: d[k] for k in NUISANCE_NAMES})

    def as_dict(self):
        return {k: getattr(self, k) for k in NUISANCE_NAMES}

    def map(self, fn):
        """Apply ``fn`` to every component."""
        return NuisanceAt(**{k: fn(v) for k, v in self.as_dict().items()})

    def replace(self, **changes):
        d = self.as_dict()
        d.update(changes)
        return NuisanceAt(**d)

    def clamped(self, eps=EPS_POS):
        return self.map(lambda v: np.clip(v, eps, 1.0 - eps))

    def take(self, idx):
        """Subset every component by an index (array-valued nuisances only)."""
        return self.map(lambda v: np.asarray(v)[idx])

    def gamma(self, a):
        return self.gamma1 if a else self.gamma0

    def mu(self, a, m):
        return getattr(self, f"mu{int(a)}{int(m)}")

    def joint(self, a, m):
        """P(A=a, M=m | X=x) composed from pi and gamma_a."""
        pa = self.pi if a else 1.0 - self.pi
        g = self.gamma(a)
        return pa * (g if m else 1.0 - g)

    @property
    def mu0(self):
        """P(Y=1 | A=0, X=x) by total probability over M."""
        return self.mu01 * self.gamma0 + self.mu00 * (1.0 - self.gamma0)

    @property
    def mu1(self):
        """P(Y=1 | A=1, X=x) by total probability over M."""
        return self.mu11 * self.gamma1 + self.mu10 * (1.0 - self.gamma1)


ESTIMAND_NAMES = (
    "tau", "xi", "psi", "delta", "zeta", "alpha_total", "beta_total",
    "delta_prime", "zeta_prime", "psi_prime", "psi_upper_bound",
)


@dataclass(frozen=True)
class EstimandValues:
    """All identified estimands at one or many covariate points.

    Values are returned raw: when the input nuisances violate monotonicity
    some of them can leave [0, 1]; ``out_of_range`` reports that.
    """

    tau: np.ndarray | float
    xi: np.ndarray | float
    psi: np.ndarray | float
    delta: np.ndarray | float
    zeta: np.ndarray | float
    alpha_total: np.ndarray | float
    beta_total: np.ndarray | float
    delta_prime: np.ndarray | float
    zeta_prime: np.ndarray | float
    psi_prime: np.ndarray | float
    psi_upper_bound: np.ndarray | float

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def out_of_range(self):
        """True where any estimand lies outside [0, 1]."""
        flag = False
        for v in self.as_dict().values():
            v = np.asarray(v)
            flag = flag | (v < 0.0) | (v > 1.0)
        return flag


def _require(name, value, eps):
    value = np.asarray(value, dtype=float)
    if np.any(~(value >= eps)):
        raise PositivityViolation(name, np.nanmin(value) if value.size else value, eps)


def pc_outcome(mu0, mu1, eps=EPS_POS):
    """Probability of causation ``1 - mu0 / mu1`` for a binary outcome."""
    _require("mu1", mu1, eps)
    return 1.0 - np.asarray(mu0, dtype=float) / mu1


def pc_mediator(gamma0, gamma1, eps=EPS_POS):
    """Probability of causation with the mediator in the outcome role.

    Also an upper bound on the probability of indirect causation.
    """
    _require("gamma1", gamma1, eps)
    return 1.0 - np.asarray(gamma0, dtype=float) / gamma1


def identify_psi(nu: NuisanceAt, eps=EPS_POS):
    """Probability of indirect causation, ``[1 - mu10/mu11][1 - gamma0/gamma1]``."""
    _require("mu11", nu.mu11, eps)
    _require("gamma1", nu.gamma1, eps)
    return (1.0 - nu.mu10 / nu.mu11) * (1.0 - nu.gamma0 / nu.gamma1)


def identify_delta(nu: NuisanceAt, eps=EPS_POS):
    """Total mediated probability of causation."""
    _require("mu11", nu.mu11, eps)
    _require("gamma1", nu.gamma1, eps)
    r = nu.gamma0 / nu.gamma1
    return (1.0 - nu.mu00 / nu.mu11) * (1.0 - r) + (1.0 - nu.mu01 / nu.mu11) * r


def identify_zeta(nu: NuisanceAt, eps=EPS_POS):
    """Probability of direct causation, ``delta - psi``."""
    return identify_delta(nu, eps) - identify_psi(nu, eps)


def identify_xi(nu: NuisanceAt, eps=EPS_POS):
    """P(M(1)=1 | Y(1)=1, x), i.e. P(M=1 | A=1, Y=1, x) by Bayes' rule."""
    num = nu.mu11 * nu.gamma1
    den = num + nu.mu10 * (1.0 - nu.gamma1)
    _require("P(Y=1|A=1,x)", den, eps)
    return num / den


def identify_totals(nu: NuisanceAt, eps=EPS_POS):
    """Total probabilities of indirect and direct causation ``(alpha, beta)``.

    ``alpha + beta`` is the (unmediated) probability of causation.
    """
    alpha = identify_psi(nu, eps) * identify_xi(nu, eps)
    beta = pc_outcome(nu.mu0, nu.mu1, eps) - alpha
    return alpha, beta


def identify_primes(nu: NuisanceAt, eps=EPS_POS):
    """Estimands on the M(1)=0 stratum: ``(delta', zeta', psi')``.

    Under monotonicity no indirect channel exists there, so ``psi' = 0``.
    """
    _require("mu10", nu.mu10, eps)
    zeta_p = 1.0 - nu.mu00 / nu.mu10
    return zeta_p, zeta_p, np.zeros_like(zeta_p)


def identify_all(nu: NuisanceAt, eps=EPS_POS) -> EstimandValues:
    psi = identify_psi(nu, eps)
    zeta = identify_zeta(nu, eps)
    xi = identify_xi(nu, eps)
    alpha, beta = identify_totals(nu, eps)
    delta_p, zeta_p, psi_p = identify_primes(nu, eps)
    return EstimandValues(
        tau=pc_outcome(nu.mu0, nu.mu1, eps),
        xi=xi,
        psi=psi,
        # same arithmetic path as zeta so that delta == psi + zeta bit-for-bit
        delta=psi + zeta,
        zeta=zeta,
        alpha_total=alpha,
        beta_total=beta,
        delta_prime=delta_p,
        zeta_prime=zeta_p,
        psi_prime=psi_p,
        psi_upper_bound=pc_mediator(nu.gamma0, nu.gamma1, eps),
    )


def identify(nu: NuisanceAt, target: str, eps=EPS_POS):
    """Dispatch to the identified curve for ``target`` in {psi, delta, zeta}."""
    if target == "psi":
        return identify_psi(nu, eps)
    if target == "delta":
        return identify_delta(nu, eps)
    if target == "zeta":
        return identify_zeta(nu, eps)
    raise ValueError(f"unknown target {target!r}")
