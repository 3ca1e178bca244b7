"""Potential-outcome data-generating process with monotone coupling.

The default :class:`DgpSpec` is the single-covariate polynomial design used in
the simulation study.  Potential mediators and outcomes are built from latent
Bernoulli draws so that ``M(1) >= M(0)``, ``Y(1,1) >= Y(1,0) >= Y(0,0)`` and
``Y(1,1) >= Y(0,1)`` hold unit by unit.  :func:`oracle_estimands` enumerates
the 64 latent-draw states exactly and evaluates each counterfactual definition
by summation, which gives an identification check that does not go through
the identifying formulas at all.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import DegenerateConditioning, DomainError
from .estimands import EstimandValues, NuisanceAt

BLOCK_SIZE = 1 << 16


@dataclass(frozen=True)
class Curve:
    """Polynomial in x, optionally passed through expit.

    ``coefs`` are in increasing degree: ``c0 + c1 x + c2 x^2 + ...``.
    """

    coefs: tuple
    link: str = "identity"

    def __post_init__(self):
        object.__setattr__(self, "coefs", tuple(float(c) for c in self.coefs))
        if self.link not in ("identity", "logit"):
            raise ValueError(f"unknown link {self.link!r}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        val = np.polynomial.polynomial.polyval(x, self.coefs)
        if self.link == "logit":
            return expit(val)
        return val * np.ones_like(x)

    def to_dict(self):
        return {"coefs": list(self.coefs), "link": self.link}


@dataclass(frozen=True)
class DgpSpec:
    """Data-generating process.

    ``gamma1_tilde``, ``mu10_tilde`` and ``mu11_tilde`` are the probabilities
    of the extra Bernoulli draws made only when the monotone coupling does not
    already force the potential value to one.  ``y0_monotone`` additionally
    couples ``Y(0,1) >= Y(0,0)``; ``mu01`` is then the conditional draw
    probability given ``Y(0,0) = 0``.
    """

    pi: Curve = Curve((-1.0, -0.5), "logit")
    gamma0: Curve = Curve((0.25, -0.1, -0.1))
    gamma1_tilde: Curve = Curve((0.65, -0.1, -0.2))
    mu00: Curve = Curve((0.5, -0.1, -0.2))
    mu01: Curve = Curve((0.3, -0.1, -0.1))
    mu10_tilde: Curve = Curve((0.6, -0.1, -0.1))
    mu11_tilde: Curve = Curve((0.4, -0.1, -0.2))
    enforce_monotonicity: bool = True
    y0_monotone: bool = False

    CURVES = ("pi", "gamma0", "gamma1_tilde", "mu00", "mu01", "mu10_tilde", "mu11_tilde")

    def latent_probs(self, x):
        """Probabilities of the draws, keyed by curve name."""
        return {name: getattr(self, name)(x) for name in self.CURVES}

    def validate(self, grid=None):
        """Check every curve maps [0, 1] into the unit interval."""
        grid = np.linspace(0.0, 1.0, 1001) if grid is None else grid
        for name in self.CURVES:
            v = getattr(self, name)(grid)
            if np.any(v < 0.0) or np.any(v > 1.0):
                raise ValueError(f"curve {name} leaves [0, 1] on the unit interval")
        nu = true_nuisance(self, grid)
        for name, v in nu.as_dict().items():
            if np.any(v <= 0.0) or np.any(v >= 1.0):
                raise ValueError(f"implied nuisance {name} leaves (0, 1)")
        return self

    def to_dict(self):
        d = {name: getattr(self, name).to_dict() for name in self.CURVES}
        d["enforce_monotonicity"] = self.enforce_monotonicity
        d["y0_monotone"] = self.y0_monotone
        return d


@dataclass
class PotentialWorld:
    """One unit's covariate, exposure and full table of potential values."""

    x: float
    a: int
    m0: int
    m1: int
    y00: int
    y01: int
    y10: int
    y11: int

    def y(self, a, m):
        return getattr(self, f"y{int(a)}{int(m)}")

    def is_monotone(self):
        return (self.m1 >= self.m0 and self.y11 >= self.y10 >= self.y00
                and self.y11 >= self.y01)


@dataclass
class ObservedRecord:
    x: float
    a: int
    m: int
    y: int


WORLD_COLUMNS = ("x", "a", "m0", "m1", "y00", "y01", "y10", "y11")


@dataclass
class Worlds:
    """Column store of sampled potential worlds."""

    x: np.ndarray
    a: np.ndarray
    m0: np.ndarray
    m1: np.ndarray
    y00: np.ndarray
    y01: np.ndarray
    y10: np.ndarray
    y11: np.ndarray

    def __len__(self):
        return len(self.x)

    def __getitem__(self, i):
        return PotentialWorld(*(getattr(self, c)[i].item() for c in WORLD_COLUMNS))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def monotone_mask(self):
        return ((self.m1 >= self.m0) & (self.y11 >= self.y10) & (self.y10 >= self.y00)
                & (self.y11 >= self.y01))

    def to_csv(self, path):
        _write_columns(path, {c: getattr(self, c) for c in WORLD_COLUMNS})


@dataclass
class ObservedData:
    """Column store of observed records ``(x, a, m, y)``.

    ``x`` is one-dimensional for the single-covariate design; for the data
    path it may be an ``(n, d)`` matrix.
    """

    x: np.ndarray
    a: np.ndarray
    m: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.a)

    def __getitem__(self, i):
        x = self.x[i]
        return ObservedRecord(x.item() if np.ndim(x) == 0 else x, int(self.a[i]),
                              int(self.m[i]), int(self.y[i]))

    def subset(self, idx):
        return ObservedData(self.x[idx], self.a[idx], self.m[idx], self.y[idx], dict(self.meta))

    def to_csv(self, path):
        cols = {}
        if np.ndim(self.x) == 1:
            cols["x"] = self.x
        else:
            for j in range(self.x.shape[1]):
                cols[f"x{j + 1}"] = self.x[:, j]
        cols.update(a=self.a, m=self.m, y=self.y)
        _write_columns(path, cols)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(int(v)) if isinstance(v, (bool, np.bool_, np.integer)) else str(v)


def _write_columns(path, cols):
    names = list(cols)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*(cols[n] for n in names)):
            w.writerow([_fmt(v) for v in row])


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(~((x >= 0.0) & (x <= 1.0))):
        raise DomainError("covariate must lie in [0, 1]")
    return x


def true_nuisance(spec: DgpSpec, x) -> NuisanceAt:
    """Observed-data nuisances implied by the coupling at covariate ``x``."""
    x = _check_x(x)
    p = spec.latent_probs(x)
    g0, mu00 = p["gamma0"], p["mu00"]
    m10t, m11t = p["mu10_tilde"], p["mu11_tilde"]
    # the uncoupled mode draws from these same marginals
    g1 = p["gamma1_tilde"] * (1.0 - g0) + g0
    mu10 = m10t * (1.0 - mu00) + mu00
    if spec.y0_monotone:
        mu01 = p["mu01"] * (1.0 - mu00) + mu00
    else:
        mu01 = p["mu01"]
    q = (1.0 - p["mu01"]) * (1.0 - m10t) * (1.0 - mu00)
    mu11 = m11t * q + (1.0 - q)
    return NuisanceAt(pi=p["pi"], gamma0=g0, gamma1=g1, mu00=mu00, mu01=mu01,
                      mu10=mu10, mu11=mu11)


def _block_rng(seed, block):
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), block]))


def _couple(spec, u, nu, p):
    """Potential values from the seven latent uniforms ``u`` (shape (7, n))."""
    if spec.enforce_monotonicity:
        m0 = u[1] < p["gamma0"]
        m1 = m0 | (u[2] < p["gamma1_tilde"])
        y00 = u[3] < p["mu00"]
        y01 = u[4] < p["mu01"]
        if spec.y0_monotone:
            y01 = y01 | y00
        y10 = y00 | (u[5] < p["mu10_tilde"])
        y11 = y01 | y10 | (u[6] < p["mu11_tilde"])
    else:
        m0 = u[1] < nu.gamma0
        m1 = u[2] < nu.gamma1
        y00 = u[3] < nu.mu00
        y01 = u[4] < nu.mu01
        y10 = u[5] < nu.mu10
        y11 = u[6] < nu.mu11
    return m0, m1, y00, y01, y10, y11


def sample_worlds(spec: DgpSpec, n: int, seed: int) -> Worlds:
    """Draw ``n`` potential worlds.

    Units are generated in fixed blocks of ``BLOCK_SIZE``; each block's stream
    is derived from ``(seed, block index)``, so the output depends only on
    ``(spec, n, seed)`` and blocks can be produced in any order.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    parts = [_sample_block(spec, seed, b, min(BLOCK_SIZE, n - b * BLOCK_SIZE))
             for b in range((n + BLOCK_SIZE - 1) // BLOCK_SIZE)]
    cols = {c: np.concatenate([p[c] for p in parts]) for c in WORLD_COLUMNS}
    return Worlds(**cols)


def _sample_block(spec, seed, block, size):
    rng = _block_rng(seed, block)
    x = rng.random(size)
    u = rng.random((7, size))
    p = spec.latent_probs(x)
    nu = true_nuisance(spec, x)
    a = u[0] < p["pi"]
    m0, m1, y00, y01, y10, y11 = _couple(spec, u, nu, p)
    out = dict(x=x, a=a, m0=m0, m1=m1, y00=y00, y01=y01, y10=y10, y11=y11)
    return {k: (v if k == "x" else v.astype(np.int8)) for k, v in out.items()}


def observe(world):
    """Apply consistency: ``M = M(A)`` and ``Y = Y(A, M(A))``.

    Accepts a single :class:`PotentialWorld` or a :class:`Worlds` batch.
    """
    if isinstance(world, PotentialWorld):
        m = world.m1 if world.a else world.m0
        return ObservedRecord(world.x, world.a, m, world.y(world.a, m))
    a = world.a.astype(bool)
    m = np.where(a, world.m1, world.m0)
    y = np.where(a, np.where(m == 1, world.y11, world.y10),
                 np.where(m == 1, world.y01, world.y00))
    return ObservedData(world.x, world.a.astype(np.int8), m.astype(np.int8), y.astype(np.int8))


def sample_observed(spec: DgpSpec, n: int, seed: int) -> ObservedData:
    return observe(sample_worlds(spec, n, seed))


def enumerate_states(spec: DgpSpec, x: float):
    """All 64 latent-draw states at ``x`` as ``(weight, world)`` pairs.

    Each state fixes the outcome of the six potential-value Bernoulli draws;
    the exposure is irrelevant to the counterfactual table and is set to 0.
    """
    x = float(_check_x(x))
    p = {k: float(v) for k, v in spec.latent_probs(x).items()}
    nu = true_nuisance(spec, x)
    if spec.enforce_monotonicity:
        probs = [p["gamma0"], p["gamma1_tilde"], p["mu00"], p["mu01"],
                 p["mu10_tilde"], p["mu11_tilde"]]
    else:
        probs = [float(nu.gamma0), float(nu.gamma1), float(nu.mu00), float(nu.mu01),
                 float(nu.mu10), float(nu.mu11)]
    states = []
    for bits in itertools.product((0, 1), repeat=6):
        w = 1.0
        for b, q in zip(bits, probs):
            w *= q if b else 1.0 - q
        d0, d1, d2, d3, d4, d5 = bits
        if spec.enforce_monotonicity:
            m0 = d0
            m1 = m0 | d1
            y00 = d2
            y01 = d3 | (y00 if spec.y0_monotone else 0)
            y10 = y00 | d4
            y11 = y01 | y10 | d5
        else:
            m0, m1, y00, y01, y10, y11 = bits
        states.append((w, PotentialWorld(x, 0, m0, m1, y00, y01, y10, y11)))
    return states


def _cond(states, event, given, what="", tol=1e-12):
    den = sum(w for w, s in states if given(s))
    if den < tol:
        raise DegenerateConditioning(f"conditioning event for {what} has probability {den:.3g}")
    return sum(w for w, s in states if given(s) and event(s)) / den


def oracle_estimands(spec: DgpSpec, x: float) -> EstimandValues:
    """Counterfactual estimands at ``x`` by exact enumeration of latent states."""
    states = enumerate_states(spec, x)

    def y1(s):
        return s.y(1, s.m1)

    def y0(s):
        return s.y(0, s.m0)

    def y1_m0(s):
        return s.y(1, s.m0)

    def given_m1(m):
        return lambda s: y1(s) == 1 and s.m1 == m

    def indirect(s):
        return y1_m0(s) == 0 and y0(s) == 0

    def direct(s):
        return y1_m0(s) == 1 and y0(s) == 0

    def exposed(s):
        return y1(s) == 1

    return EstimandValues(
        tau=_cond(states, lambda s: y0(s) == 0, exposed, "tau"),
        xi=_cond(states, lambda s: s.m1 == 1, exposed, "xi"),
        psi=_cond(states, indirect, given_m1(1), "psi"),
        delta=_cond(states, lambda s: y0(s) == 0, given_m1(1), "delta"),
        zeta=_cond(states, direct, given_m1(1), "zeta"),
        alpha_total=_cond(states, indirect, exposed, "alpha"),
        beta_total=_cond(states, direct, exposed, "beta"),
        delta_prime=_cond(states, lambda s: y0(s) == 0, given_m1(0), "delta'"),
        zeta_prime=_cond(states, direct, given_m1(0), "zeta'"),
        psi_prime=_cond(states, indirect, given_m1(0), "psi'"),
        psi_upper_bound=_cond(states, lambda s: s.m0 == 0, lambda s: s.m1 == 1, "pc_mediator"),
    )
