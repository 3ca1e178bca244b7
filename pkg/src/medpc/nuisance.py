"""Nuisance models: exact truth, truth with injected noise, and logit fits.

A nuisance model is a callable ``model(x) -> NuisanceAt``.  Every model clamps
its probabilities to ``[CLAMP, 1 - CLAMP]``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit

from .basis import cross, gram, linpred
from .errors import BadFoldCount, ConvergenceFailure, EmptySubset
from .estimands import NUISANCE_NAMES, NuisanceAt
from .world import DgpSpec, ObservedData, true_nuisance

log = logging.getLogger(__name__)

CLAMP = 1e-3

# response variable and (a, m) cell restriction for each nuisance
TARGETS = {
    "pi": ("a", None, None),
    "gamma0": ("m", 0, None),
    "gamma1": ("m", 1, None),
    "mu00": ("y", 0, 0),
    "mu01": ("y", 0, 1),
    "mu10": ("y", 1, 0),
    "mu11": ("y", 1, 1),
}


def _clamp(nu: NuisanceAt) -> NuisanceAt:
    return nu.clamped(CLAMP)


class NuisanceModel:
    """Base class. Subclasses implement ``_evaluate``."""

    provenance = "exact"
    fold = None

    def __call__(self, x) -> NuisanceAt:
        return _clamp(self._evaluate(np.asarray(x, dtype=float)))

    def _evaluate(self, x):
        raise NotImplementedError


class TrueNuisance(NuisanceModel):
    """Nuisances implied by a :class:`DgpSpec`."""

    provenance = "exact"

    def __init__(self, spec: DgpSpec):
        self.spec = spec

    def _evaluate(self, x):
        return true_nuisance(self.spec, x)


@dataclass(frozen=True)
class NoiseSpec:
    """Logit-scale Gaussian error ``N(c1 n^-alpha, c2 n^-2alpha)``.

    ``c1`` and ``c2`` are scalars or mappings from nuisance name to constant.
    ``mode`` is ``"per_point"`` (fresh draw at every evaluation point) or
    ``"function"`` (one shift per nuisance shared by all points).
    """

    alpha_rate: float
    n: int
    c1: float | dict = 1.0
    c2: float | dict = 1.0
    mode: str = "per_point"

    def __post_init__(self):
        if not self.alpha_rate > 0:
            raise ValueError("alpha_rate must be positive")
        if self.mode not in ("per_point", "function"):
            raise ValueError(f"unknown noise mode {self.mode!r}")

    def _const(self, c, name):
        return float(c[name]) if isinstance(c, dict) else float(c)

    def mean(self, name):
        return self._const(self.c1, name) * self.n ** (-self.alpha_rate)

    def sd(self, name):
        return np.sqrt(self._const(self.c2, name)) * self.n ** (-self.alpha_rate)


class NoisyNuisance(NuisanceModel):
    """Truth perturbed on the logit scale.

    In ``per_point`` mode the i-th evaluation point receives the i-th draw of
    a stream seeded by ``(seed, component)``, so evaluating the same covariate
    vector twice reproduces the same values and components are independent.
    """

    provenance = "noisy"

    def __init__(self, truth: NuisanceModel, spec: NoiseSpec, seed):
        self.truth = truth
        self.spec = spec
        self.seed = int(seed)

    def draws(self, name, size):
        j = NUISANCE_NAMES.index(name)
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, j]))
        n = 1 if self.spec.mode == "function" else size
        eps = rng.normal(self.spec.mean(name), self.spec.sd(name), size=n)
        return np.broadcast_to(eps, (size,)) if self.spec.mode == "function" else eps

    def _evaluate(self, x):
        nu = self.truth(x)
        size = np.size(x)
        out = {}
        for name, v in nu.as_dict().items():
            v = np.asarray(v, dtype=float)
            if self.spec.mean(name) == 0.0 and self.spec.sd(name) == 0.0:
                out[name] = v
            else:
                out[name] = expit(logit(v) + self.draws(name, size).reshape(v.shape))
        return NuisanceAt(**out)


def perturb(truth: NuisanceModel, spec: NoiseSpec, seed) -> NoisyNuisance:
    """Inject logit-scale noise into all seven nuisance components."""
    return NoisyNuisance(truth, spec, seed)


class ShiftedNuisance(NuisanceModel):
    """Truth with a constant logit shift applied to selected components."""

    provenance = "noisy"

    def __init__(self, truth: NuisanceModel, shifts: dict):
        self.truth = truth
        self.shifts = dict(shifts)

    def _evaluate(self, x):
        nu = self.truth(x)
        return nu.replace(**{k: expit(logit(getattr(nu, k)) + s) for k, s in self.shifts.items()})


@dataclass
class LogitFit:
    """Logit-linear model ``expit(b(x)^T coef)`` for one nuisance."""

    coef: np.ndarray
    cov: np.ndarray
    basis: object
    target: str
    n_iter: int
    n: int

    def __call__(self, x):
        return np.clip(expit(linpred(self.basis(x), self.coef)), CLAMP, 1.0 - CLAMP)


def _subset_mask(data, target, subset):
    if subset is not None:
        return np.asarray(subset(data.a, data.m), dtype=bool)
    _, a, m = TARGETS[target]
    mask = np.ones(len(data), dtype=bool)
    if a is not None:
        mask &= data.a == a
    if m is not None:
        mask &= data.m == m
    return mask


def fit_logit(data: ObservedData, basis, target: str, subset=None,
              tol=1e-10, max_iter=100, ridge=1e-8) -> LogitFit:
    """Maximum-likelihood logistic regression by damped Newton iterations.

    Parameters
    ----------
    data : ObservedData
    basis : callable
        Maps covariates to an ``(n, k)`` design matrix.
    target : str
        Nuisance name; selects the response column and default subset.
    subset : callable, optional
        ``subset(a, m) -> bool mask`` overriding the default cell restriction.
    """
    resp_col = TARGETS[target][0]
    mask = _subset_mask(data, target, subset)
    if not mask.any():
        raise EmptySubset(f"no records for {target}")
    X = basis(data.x[mask])
    y = getattr(data, resp_col)[mask].astype(float)
    n, k = X.shape
    beta = np.zeros(k)

    def loglik(b):
        eta = linpred(X, b)
        return np.sum(y * eta - np.logaddexp(0.0, eta))

    ll = loglik(beta)
    for it in range(1, max_iter + 1):
        p = expit(linpred(X, beta))
        H = gram(X, p * (1.0 - p))
        g = cross(X, y - p)
        try:
            if np.linalg.cond(H) > 1e12:
                raise np.linalg.LinAlgError
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = np.linalg.solve(H + ridge * np.eye(k), g)
        t = 1.0
        while t > 1e-8:
            cand = beta + t * step
            ll_new = loglik(cand)
            if ll_new >= ll - 1e-12 * abs(ll):
                break
            t *= 0.5
        beta, ll = cand, ll_new
        if np.max(np.abs(t * step)) < tol:
            p = expit(linpred(X, beta))
            H = gram(X, p * (1.0 - p)) + ridge * np.eye(k)
            return LogitFit(beta, np.linalg.inv(H), basis, target, it, n)
    raise ConvergenceFailure(f"logit fit for {target} did not converge in {max_iter} iterations")


class FittedNuisance(NuisanceModel):
    """Seven logit fits trained on one sample."""

    provenance = "fitted"

    def __init__(self, fits: dict, fold=None):
        self.fits = fits
        self.fold = fold

    def _evaluate(self, x):
        return NuisanceAt(**{k: self.fits[k](x) for k in NUISANCE_NAMES})


def fit_nuisance(data: ObservedData, basis, fold=None) -> FittedNuisance:
    return FittedNuisance({k: fit_logit(data, basis, k) for k in NUISANCE_NAMES}, fold)


def assign_folds(n: int, k: int, seed) -> np.ndarray:
    """Random near-equal partition of ``range(n)`` into ``k`` folds."""
    if k < 2 or n < 2 * k:
        raise BadFoldCount(f"need k >= 2 and n >= 2k (got n={n}, k={k})")
    perm = np.random.default_rng(seed).permutation(n)
    labels = np.empty(n, dtype=np.int64)
    labels[perm] = np.arange(n) % k
    return labels


@dataclass
class CrossFit:
    nuisance: NuisanceAt
    folds: np.ndarray
    models: list = field(default_factory=list)


def crossfit_nuisance(data: ObservedData, basis, k=2, seed=0) -> CrossFit:
    """Per-record nuisances, each from models trained on the other folds."""
    folds = assign_folds(len(data), k, seed)
    comps = {name: np.empty(len(data)) for name in NUISANCE_NAMES}
    models = []
    for f in range(k):
        held = folds == f
        model = fit_nuisance(data.subset(~held), basis, fold=f)
        models.append(model)
        nu = model(data.x[held])
        for name in NUISANCE_NAMES:
            comps[name][held] = getattr(nu, name)
    return CrossFit(NuisanceAt(**comps), folds, models)
