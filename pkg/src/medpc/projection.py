"""Projection of a pseudo-outcome onto a working model, with sandwich inference.

The projection parameter solves the weighted moment condition

    sum_i  dg(X_i; beta)/dbeta * w(X_i) * (phi_i - g(X_i; beta)) = 0.

For a linear working model ``g(x; beta) = b(x)^T beta`` this is weighted
least squares of ``phi`` on ``b(X)``.  A logit working model
``g = expit(b(x)^T beta)`` is solved by damped Newton iterations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import expit

from .basis import PolynomialBasis, UniformWeight, cross, gram, linpred
from .eif import pseudo_outcome
from .errors import ConvergenceFailure, SingularDesign
from .estimands import identify
from .world import DgpSpec, _check_x, true_nuisance

TRUTH_CHUNK = 1_000_000


@dataclass(frozen=True)
class ProjectionModel:
    """Working model ``g(x; beta)`` with basis, weight function and target."""

    basis: object = PolynomialBasis(1)
    weight: object = UniformWeight()
    target: str = "psi"
    link: str = "identity"

    def __post_init__(self):
        if self.link not in ("identity", "logit"):
            raise ValueError(f"unknown link {self.link!r}")

    def with_target(self, target):
        return ProjectionModel(self.basis, self.weight, target, self.link)

    def predict(self, x, beta):
        eta = linpred(self.basis(x), np.asarray(beta, dtype=float))
        return expit(eta) if self.link == "logit" else eta

    def gradient(self, x, beta):
        """``dg/dbeta`` at each row of ``x``, shape ``(n, k)``."""
        B = self.basis(x)
        if self.link == "identity":
            return B
        g = expit(linpred(B, np.asarray(beta, dtype=float)))
        return B * (g * (1.0 - g))[:, None]


@dataclass
class ProjectionFit:
    """Solved projection.

    ``vcov`` is the asymptotic covariance of ``sqrt(n) (beta_hat - beta)``,
    i.e. ``bread^-1 meat bread^-T``; :attr:`cov` divides by ``n``.
    """

    beta: np.ndarray
    vcov: np.ndarray
    n: int
    bread: np.ndarray
    meat: np.ndarray
    target: str = "psi"
    k_folds: int | None = None
    n_iter: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def cov(self):
        return self.vcov / self.n

    @property
    def se(self):
        return np.sqrt(np.diag(self.cov))

    def to_dict(self):
        return {
            "target": self.target,
            "beta": self.beta.tolist(),
            "vcov": self.vcov.tolist(),
            "cov_beta": self.cov.tolist(),
            "n": self.n,
            "k_folds": self.k_folds,
            "bread": self.bread.tolist(),
            "meat": self.meat.tolist(),
            "meta": self.meta,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        return cls(beta=np.array(d["beta"]), vcov=np.array(d["vcov"]), n=d["n"],
                   bread=np.array(d["bread"]), meat=np.array(d["meat"]),
                   target=d.get("target", "psi"), k_folds=d.get("k_folds"),
                   meta=d.get("meta", {}))

    @classmethod
    def from_json(cls, s):
        return cls.from_dict(json.loads(s))


def _solve_square(A, b):
    if not np.all(np.isfinite(A)) or np.linalg.cond(A) > 1e12:
        raise SingularDesign(f"design matrix is singular (cond={np.linalg.cond(A):.3g})")
    return np.linalg.solve(A, b)


def sandwich(x, phi, model: ProjectionModel, beta):
    """Bread, meat and ``bread^-1 meat bread^-T`` at ``beta``.

    The bread is the derivative of the averaged estimating function; the meat
    averages the outer product of the estimating function at ``beta``.
    """
    n = len(phi)
    w = model.weight(x)
    D = model.gradient(x, beta)
    resid = phi - model.predict(x, beta)
    bread = -gram(D, w) / n
    if model.link == "logit":
        B = model.basis(x)
        g = expit(linpred(B, np.asarray(beta, dtype=float)))
        curv = g * (1.0 - g) * (1.0 - 2.0 * g)
        bread = bread + gram(B, w * curv * resid) / n
    meat = gram(D, (w * resid) ** 2) / n
    if not np.all(np.isfinite(bread)) or np.linalg.cond(bread) > 1e12:
        raise SingularDesign("sandwich bread is singular")
    inv = np.linalg.inv(bread)
    vcov = inv @ meat @ inv.T
    return bread, meat, 0.5 * (vcov + vcov.T)


def fit_pseudo_outcomes(x, phi, model: ProjectionModel, tol=1e-10, max_iter=200,
                        k_folds=None) -> ProjectionFit:
    """Solve the projection moment condition for given pseudo-outcomes."""
    phi = np.asarray(phi, dtype=float)
    n = len(phi)
    B = model.basis(x)
    k = B.shape[1]
    if n <= k:
        raise SingularDesign(f"need n > k (n={n}, k={k})")
    w = model.weight(x)
    beta = _solve_square(gram(B, w) / n, cross(B, phi, w) / n)
    n_iter = 0
    if model.link == "logit":
        beta, n_iter = _newton_logit(x, phi, model, B, w, tol, max_iter)
    bread, meat, vcov = sandwich(x, phi, model, beta)
    return ProjectionFit(beta, vcov, n, bread, meat, model.target, k_folds, n_iter)


def _newton_logit(x, phi, model, B, w, tol, max_iter):
    n = len(phi)
    k = B.shape[1]
    # start from the logit of the clipped linear fit's mean
    start = np.clip(np.sum(w * phi) / np.sum(w), 1e-3, 1 - 1e-3)
    beta = np.zeros(k)
    beta[0] = math.log(start / (1 - start))

    def moment(b):
        return cross(model.gradient(x, b), phi - model.predict(x, b), w) / n

    U = moment(beta)
    for it in range(1, max_iter + 1):
        g = expit(linpred(B, beta))
        s = g * (1.0 - g)
        J = -gram(B, w * s * s) / n + gram(B, w * s * (1.0 - 2.0 * g) * (phi - g)) / n
        step = -_solve_square(J, U)
        t = 1.0
        norm0 = np.linalg.norm(U)
        while t > 1e-10:
            cand = beta + t * step
            U_new = moment(cand)
            if np.linalg.norm(U_new) <= norm0 or t < 1e-6:
                break
            t *= 0.5
        beta, U = cand, U_new
        if np.max(np.abs(t * step)) < tol or np.linalg.norm(U) < tol:
            return beta, it
    raise ConvergenceFailure(f"projection Newton did not converge in {max_iter} iterations")


def solve(data, model: ProjectionModel, nuisance, variant="corrected", k_folds=None) -> ProjectionFit:
    """Projection fit from observed records and per-record nuisance values.

    ``nuisance`` must already respect the cross-fitting discipline: each
    record's values come from models that did not see that record (or are
    independent of the data altogether).
    """
    phi = pseudo_outcome(data, nuisance, model.target, variant).value
    return fit_pseudo_outcomes(data.x, phi, model, k_folds=k_folds)


def predict_ci(fit: ProjectionFit, model: ProjectionModel, x, level=0.95):
    """Point estimate and normal-theory interval for ``g(x; beta_hat)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    est = model.predict(x, fit.beta)
    se = prediction_se(fit, model, x)
    z = stats.norm.ppf(0.5 + level / 2.0)
    return est, est - z * se, est + z * se


def prediction_se(fit, model, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    D = model.gradient(x, fit.beta)
    return np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", D, fit.cov, D), 0.0))


def true_projection(spec: DgpSpec, model: ProjectionModel, pop_size=10_000_000, seed=0):
    """Population projection coefficients from a large simulated population.

    Covariates are drawn in fixed chunks with streams derived from
    ``(seed, chunk)``; the target curve is evaluated exactly from the true
    nuisances and projected with the same working model.
    """
    xs, vals = [], []
    for c, start in enumerate(range(0, pop_size, TRUTH_CHUNK)):
        size = min(TRUTH_CHUNK, pop_size - start)
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x7472, c]))
        x = rng.random(size)
        xs.append(x)
        vals.append(identify(true_nuisance(spec, x), model.target))
    if model.link == "identity":
        # chunked normal equations keep memory flat at ten million points
        G = sum(gram(model.basis(x), model.weight(x)) for x in xs)
        c = sum(cross(model.basis(x), v, model.weight(x)) for x, v in zip(xs, vals))
        return _solve_square(G, c)
    return fit_pseudo_outcomes(np.concatenate(xs), np.concatenate(vals), model).beta


def quadrature_projection(spec: DgpSpec, model: ProjectionModel, nodes=400):
    """Population projection for ``X ~ Uniform(0, 1)`` by Gauss-Legendre quadrature.

    Deterministic counterpart of :func:`true_projection` (linear models only).
    """
    if model.link != "identity":
        raise ValueError("quadrature projection supports linear working models only")
    t, wq = np.polynomial.legendre.leggauss(nodes)
    x = 0.5 * (t + 1.0)
    wq = 0.5 * wq
    x = _check_x(x)
    vals = identify(true_nuisance(spec, x), model.target)
    B = model.basis(x)
    w = model.weight(x) * wq
    return _solve_square(gram(B, w), cross(B, vals, w))
