"""Replicated simulation study and curve tables.

:func:`run` repeats: sample ``n`` records from the DGP, build nuisances (truth
with injected noise, or cross-fitted logit models), compute pseudo-outcomes,
solve the linear projection and record ``g(eval_x; beta_hat)`` with its
interval.  Per-replicate seeds are derived from ``(seed, replicate)`` so the
report does not depend on execution order or worker count; aggregation uses
exactly rounded sums, which makes it invariant to replicate order.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .basis import PolynomialBasis
from .errors import MedPCError, SimulationFailure
from .estimands import NUISANCE_NAMES, identify_all, pc_mediator
from .nuisance import NoiseSpec, TrueNuisance, crossfit_nuisance, perturb
from .projection import (ProjectionModel, fit_pseudo_outcomes, prediction_se,
                         quadrature_projection, true_projection)
from .eif import pseudo_outcome
from .world import DgpSpec, sample_observed, true_nuisance

log = logging.getLogger(__name__)

TARGET_LABELS = {"psi": "Indirect", "zeta": "Direct", "delta": "Total"}

# published simulation table (truth, bias, rmse, coverage), for side-by-side display only
REFERENCE_TABLE = {
    ("psi", 0.3): (0.44, -0.01, 0.05, 0.96), ("psi", 0.1): (0.44, 0.23, 0.30, 0.80),
    ("zeta", 0.3): (0.22, 0.02, 0.05, 0.94), ("zeta", 0.1): (0.22, -0.13, 0.23, 0.92),
    ("delta", 0.3): (0.65, 0.01, 0.04, 0.94), ("delta", 0.1): (0.65, 0.10, 0.15, 0.89),
}

CSV_COLUMNS = ("target", "alpha_rate", "truth", "bias", "rmse", "coverage",
               "mc_se_coverage", "n_fail")

_TRUTH_CACHE = {}


@dataclass(frozen=True)
class SimulationConfig:
    """Settings for :func:`run`.

    ``nuisance_mode`` is ``"noisy"`` (truth plus logit-scale noise at each
    rate in ``alpha_rates``) or ``"fitted"`` (cross-fitted logit models with
    ``nuisance_basis``; ``alpha_rates`` is ignored).
    """

    n_reps: int = 1000
    n: int = 1000
    alpha_rates: tuple = (0.3, 0.1)
    c1: float | dict = 1.0
    c2: float | dict = 1.0
    noise_mode: str = "per_point"
    eval_x: float = 0.75
    targets: tuple = ("psi", "delta", "zeta")
    pop_size_truth: int = 10_000_000
    seed: int = 20240607
    nuisance_mode: str = "noisy"
    k_folds: int = 2
    level: float = 0.95
    variant: str = "corrected"
    spec: DgpSpec = DgpSpec()
    model: ProjectionModel = ProjectionModel()
    nuisance_basis: object = PolynomialBasis(3)
    truth_method: str = "population"
    max_fail_frac: float = 0.01

    def __post_init__(self):
        if self.n_reps < 1:
            raise ValueError("n_reps must be >= 1")
        if not 0.0 <= self.eval_x <= 1.0:
            raise ValueError("eval_x must lie in [0, 1]")
        if self.nuisance_mode not in ("noisy", "fitted"):
            raise ValueError(f"unknown nuisance_mode {self.nuisance_mode!r}")
        if self.truth_method not in ("population", "quadrature"):
            raise ValueError(f"unknown truth_method {self.truth_method!r}")
        for t in self.targets:
            if t not in TARGET_LABELS:
                raise ValueError(f"unknown target {t!r}")

    @property
    def rates(self):
        return tuple(self.alpha_rates) if self.nuisance_mode == "noisy" else (None,)


@dataclass
class ReportRow:
    target: str
    alpha_rate: float | None
    truth: float
    bias: float
    rmse: float
    coverage: float
    mc_se_coverage: float
    n_fail: int
    n_ok: int
    emp_sd: float
    mean_se: float


@dataclass
class SimulationReport:
    rows: list
    estimates: dict = field(default_factory=dict)
    betas: dict = field(default_factory=dict)
    config: SimulationConfig | None = None

    def row(self, target, alpha_rate=None):
        for r in self.rows:
            if r.target == target and r.alpha_rate == alpha_rate:
                return r
        raise KeyError((target, alpha_rate))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in self.rows:
                w.writerow([r.target, "fitted" if r.alpha_rate is None else repr(r.alpha_rate),
                            repr(r.truth), repr(r.bias), repr(r.rmse), repr(r.coverage),
                            repr(r.mc_se_coverage), str(r.n_fail)])

    def to_text(self, reference=True):
        """Fixed-width table, one block per rate, with reference values alongside."""
        lines = []
        for rate in dict.fromkeys(r.alpha_rate for r in self.rows):
            head = "fitted nuisances" if rate is None else f"alpha = {rate}"
            lines.append(head)
            cols = f"{'Estimand':<10}{'Truth':>8}{'Bias':>8}{'RMSE':>8}{'Coverage':>10}{'MC SE':>8}{'Fail':>6}"
            if reference and rate is not None:
                cols += "   | ref: Truth  Bias  RMSE  Cov"
            lines.append(cols)
            for r in self.rows:
                if r.alpha_rate != rate:
                    continue
                line = (f"{TARGET_LABELS[r.target]:<10}{r.truth:8.3f}{r.bias:8.3f}{r.rmse:8.3f}"
                        f"{r.coverage:10.3f}{r.mc_se_coverage:8.3f}{r.n_fail:6d}")
                ref = REFERENCE_TABLE.get((r.target, rate))
                if reference and ref:
                    line += "   |      " + "  ".join(f"{v:5.2f}" for v in ref)
                lines.append(line)
            lines.append("")
        return "\n".join(lines)


def truth_at(config: SimulationConfig, target):
    """``g(eval_x; beta_0)`` for the population projection, cached."""
    model = config.model.with_target(target)
    key = (config.spec, model, config.pop_size_truth, config.seed, config.truth_method)
    if key not in _TRUTH_CACHE:
        if config.truth_method == "quadrature":
            beta = quadrature_projection(config.spec, model)
        else:
            beta = true_projection(config.spec, model, config.pop_size_truth, config.seed)
        _TRUTH_CACHE[key] = beta
    beta = _TRUTH_CACHE[key]
    return float(model.predict(np.array([config.eval_x]), beta)[0]), beta


def _rep_seed(seed, rate_index, r, purpose):
    return np.random.SeedSequence([int(seed), rate_index, int(r), purpose]).generate_state(2)


def run_replicate(config: SimulationConfig, rate_index: int, r: int):
    """One replicate; returns ``{target: (estimate, se, beta)}``."""
    rate = config.rates[rate_index]
    data_seed = int(_rep_seed(config.seed, rate_index, r, 0)[0])
    data = sample_observed(config.spec, config.n, data_seed)
    k_folds = None
    if config.nuisance_mode == "noisy":
        noise = NoiseSpec(rate, config.n, config.c1, config.c2, config.noise_mode)
        noise_seed = int(_rep_seed(config.seed, rate_index, r, 1)[0])
        nu = perturb(TrueNuisance(config.spec), noise, noise_seed)(data.x)
    else:
        fold_seed = int(_rep_seed(config.seed, rate_index, r, 2)[0])
        nu = crossfit_nuisance(data, config.nuisance_basis, config.k_folds, fold_seed).nuisance
        k_folds = config.k_folds
    x0 = np.array([config.eval_x])
    out = {}
    for t in config.targets:
        model = config.model.with_target(t)
        phi = pseudo_outcome(data, nu, t, config.variant).value
        fit = fit_pseudo_outcomes(data.x, phi, model, k_folds=k_folds)
        est = float(model.predict(x0, fit.beta)[0])
        se = float(prediction_se(fit, model, x0)[0])
        out[t] = (est, se, fit.beta)
    return out


def _safe_replicate(args):
    config, rate_index, r = args
    try:
        return run_replicate(config, rate_index, r)
    except (MedPCError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        log.warning("replicate %d failed: %s", r, exc)
        return exc


def _fsum_mean(v):
    return math.fsum(v) / len(v)


def aggregate(target, rate, truth, results, z):
    ok = [res[target] for res in results if not isinstance(res, Exception)]
    n_fail = len(results) - len(ok)
    if not ok:
        nan = float("nan")
        return ReportRow(target, rate, truth, nan, nan, nan, nan, n_fail, 0, nan, nan)
    est = np.array([o[0] for o in ok])
    se = np.array([o[1] for o in ok])
    err = est - truth
    covered = (np.abs(err) <= z * se).astype(float)
    cov = _fsum_mean(covered)
    mean_est = _fsum_mean(est)
    return ReportRow(
        target=target, alpha_rate=rate, truth=truth,
        bias=mean_est - truth,
        rmse=math.sqrt(_fsum_mean(err * err)),
        coverage=cov,
        mc_se_coverage=math.sqrt(cov * (1.0 - cov) / len(ok)),
        n_fail=n_fail, n_ok=len(ok),
        emp_sd=math.sqrt(_fsum_mean((est - mean_est) ** 2)),
        mean_se=_fsum_mean(se),
    )


def run(config: SimulationConfig, workers=1, order=None) -> SimulationReport:
    """Run the simulation study.

    Parameters
    ----------
    workers : int
        Process count for replicates; results are identical for any value.
    order : sequence of int, optional
        Replicate execution order (a permutation of ``range(n_reps)``).
    """
    from scipy import stats

    z = stats.norm.ppf(0.5 + config.level / 2.0)
    truths = {t: truth_at(config, t) for t in config.targets}
    order = list(range(config.n_reps)) if order is None else list(order)
    rows, estimates, betas = [], {}, {}
    failures = 0
    for ri, rate in enumerate(config.rates):
        jobs = [(config, ri, r) for r in order]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                done = list(ex.map(_safe_replicate, jobs, chunksize=16))
        else:
            done = [_safe_replicate(j) for j in jobs]
        # restore canonical replicate order before aggregating
        results = [res for _, res in sorted(zip(order, done), key=lambda p: p[0])]
        failures = max(failures, sum(isinstance(res, Exception) for res in results))
        for t in config.targets:
            truth = truths[t][0]
            rows.append(aggregate(t, rate, truth, results, z))
            estimates[(t, rate)] = np.array(
                [np.nan if isinstance(res, Exception) else res[t][0] for res in results])
            betas[(t, rate)] = np.array(
                [np.full(len(truths[t][1]), np.nan) if isinstance(res, Exception) else res[t][2]
                 for res in results])
    report = SimulationReport(rows, estimates, betas, config)
    if failures > config.max_fail_frac * config.n_reps:
        raise SimulationFailure(f"{failures} of {config.n_reps} replicates failed", report)
    return report


def curve_sweep(spec: DgpSpec, grid, model: ProjectionModel | None = None):
    """Nuisance, estimand and projection curves over a covariate grid.

    Returns a dict with ``nuisances``, ``estimands`` and ``projections``
    column tables (dicts of arrays) plus ``psi_crossing``: the smallest grid
    point from which psi stays above 0.5, or ``None``.
    """
    model = ProjectionModel() if model is None else model
    grid = np.asarray(grid, dtype=float)
    nu = true_nuisance(spec, grid)
    ev = identify_all(nu)
    nuisances = {"x": grid, **{k: np.asarray(getattr(nu, k)) for k in NUISANCE_NAMES},
                 "mu0": nu.mu0, "mu1": nu.mu1}
    estimands = {
        "x": grid,
        "ate_mediator": nu.gamma1 - nu.gamma0,
        "ate_outcome": nu.mu1 - nu.mu0,
        "tau": ev.tau,
        "pc_mediator": pc_mediator(nu.gamma0, nu.gamma1),
        "psi": ev.psi,
        "delta": ev.delta,
        "zeta": ev.zeta,
        "xi": ev.xi,
        "alpha_total": ev.alpha_total,
        "beta_total": ev.beta_total,
        "delta_prime": ev.delta_prime,
    }
    projections = {"x": grid}
    coefs = {}
    for t in ("psi", "delta", "zeta"):
        m = model.with_target(t)
        beta = quadrature_projection(spec, m)
        coefs[t] = beta
        projections[f"{t}_true"] = estimands[t]
        projections[f"{t}_proj"] = m.predict(grid, beta)
    above = ev.psi > 0.5
    crossing = None
    if above.any() and above[-1]:
        first = len(above) - np.argmin(above[::-1]) if not above.all() else 0
        crossing = float(grid[first])
    return {"nuisances": nuisances, "estimands": estimands, "projections": projections,
            "coefficients": coefs, "psi_crossing": crossing}


def with_overrides(config: SimulationConfig, **kw) -> SimulationConfig:
    return replace(config, **kw)
