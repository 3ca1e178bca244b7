"""Command-line entry point.

Subcommands: ``table1``, ``simulate``, ``figures``, ``oracle-check``,
``estimate``.  Exit codes: 0 ok, 2 config/data error, 3 estimation failure,
4 identification-check failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import config as cfgmod
from .basis import parse_basis
from .eif import pseudo_outcome
from .errors import (BadFoldCount, ConvergenceFailure, DegenerateConditioning, EmptySubset,
                     PositivityViolation, SimulationFailure, SingularDesign)
from .estimands import identify_all
from .montecarlo import curve_sweep, run
from .nuisance import crossfit_nuisance
from .projection import fit_pseudo_outcomes, predict_ci, prediction_se
from .world import ObservedData, _write_columns, oracle_estimands, true_nuisance

log = logging.getLogger("medpc")

EXIT_OK, EXIT_CONFIG, EXIT_ESTIMATION, EXIT_IDENTIFICATION = 0, 2, 3, 4


class DataError(ValueError):
    pass


def _outdir(cfg):
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    return out


def _write_text(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def cmd_table1(cfg, args):
    sim = cfgmod.simulation_from(cfg)
    out = _outdir(cfg)
    try:
        report = run(sim, workers=int(cfg["threads"]))
    except SimulationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.report is not None:
            exc.report.to_csv(os.path.join(out, f"{args.name}.csv"))
        return EXIT_ESTIMATION
    report.to_csv(os.path.join(out, f"{args.name}.csv"))
    text = report.to_text()
    _write_text(os.path.join(out, f"{args.name}.txt"), text)
    print(text)
    return EXIT_OK


def cmd_figures(cfg, args):
    spec = cfgmod.dgp_from(cfg)
    model = cfgmod.projection_from(cfg)
    grid = np.linspace(0.0, 1.0, int(cfg["figures"]["grid_points"]))
    curves = curve_sweep(spec, grid, model)
    out = _outdir(cfg)
    for name in ("nuisances", "estimands", "projections"):
        _write_columns(os.path.join(out, f"{name}.csv"), curves[name])
    coefs = {t: [float(c) for c in b] for t, b in curves["coefficients"].items()}
    summary = {"psi_crossing": curves["psi_crossing"], "projection_coefficients": coefs}
    _write_text(os.path.join(out, "figures.json"), json.dumps(summary, indent=2) + "\n")
    cross = curves["psi_crossing"]
    print("psi > 0.5 for x >= %s" % ("(never)" if cross is None else repr(cross)))
    return EXIT_OK


def _max_diff(spec, grid):
    worst = 0.0
    for x in grid:
        b = identify_all(true_nuisance(spec, x)).as_dict()
        a = oracle_estimands(spec, x).as_dict()
        worst = max(worst, max(abs(float(a[k]) - float(b[k])) for k in a))
    return worst


def cmd_oracle_check(cfg, args):
    import dataclasses

    spec = cfgmod.dgp_from(cfg)
    oc = cfg["oracle"]
    grid = np.linspace(0.0, 1.0, int(oc["grid_points"]))
    try:
        monotone = dataclasses.replace(spec, enforce_monotonicity=True)
        diff = _max_diff(monotone, grid)
        violated = dataclasses.replace(spec, enforce_monotonicity=False)
        diff_v = _max_diff(violated, grid)
    except (PositivityViolation, DegenerateConditioning) as exc:
        print(f"identification check failed on the configured DGP: {exc}", file=sys.stderr)
        return EXIT_IDENTIFICATION
    ok = diff < float(oc["tol"])
    detected = diff_v > float(oc["violation_threshold"])
    print(f"monotone DGP: max |oracle - identified| = {diff:.3e} ({'pass' if ok else 'FAIL'})")
    print(f"violated DGP: max |oracle - identified| = {diff_v:.3e} "
          f"({'divergence detected' if detected else 'FAIL: no divergence'})")
    return EXIT_OK if ok and detected else EXIT_IDENTIFICATION


def read_records(path) -> ObservedData:
    """Parse a CSV with covariate column(s) ``x``/``x*`` and binary ``a, m, y``."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read data {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError("data file is empty") from None
        xcols = [i for i, h in enumerate(header) if h == "x" or h.startswith("x")]
        for col in ("a", "m", "y"):
            if col not in header:
                raise DataError(f"data is missing column '{col}'")
        if not xcols:
            raise DataError("data has no covariate column 'x'")
        idx = {c: header.index(c) for c in ("a", "m", "y")}
        xs, bins = [], {c: [] for c in idx}
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"row {line}: expected {len(header)} fields, got {len(row)}")
            try:
                xs.append([float(row[i]) for i in xcols])
            except ValueError:
                raise DataError(f"row {line}: non-numeric covariate") from None
            for c, i in idx.items():
                v = row[i].strip()
                if v not in ("0", "1"):
                    raise DataError(f"row {line}: column {c} has non-binary value {v!r}")
                bins[c].append(int(v))
    if not xs:
        raise DataError("data has no rows")
    x = np.array(xs)
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite covariate value")
    x = x[:, 0] if x.shape[1] == 1 else x
    return ObservedData(x, *(np.array(bins[c], dtype=np.int8) for c in ("a", "m", "y")))


def cmd_estimate(cfg, args):
    est = cfg["estimate"]
    try:
        data = read_records(args.data)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        nbasis = parse_basis(est["nuisance_basis"])
        model = cfgmod.projection_from(cfg, "projection_basis", "estimate")
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    x_eval = np.asarray(est["x_eval"], dtype=float)
    if np.ndim(data.x) == 2 and x_eval.ndim == 1:
        x_eval = x_eval[None, :]
    k = int(est["k_folds"])
    try:
        cf = crossfit_nuisance(data, nbasis, k, int(cfg["seed"]))
        result = {"n": len(data), "k_folds": k, "nuisance_basis": est["nuisance_basis"],
                  "projection_basis": est["projection_basis"], "seed": int(cfg["seed"]),
                  "targets": {}}
        for t in est["targets"]:
            m = model.with_target(t)
            phi = pseudo_outcome(data, cf.nuisance, t, est["variant"]).value
            fit = fit_pseudo_outcomes(data.x, phi, m, k_folds=k)
            g, lo, hi = predict_ci(fit, m, x_eval, float(est["level"]))
            se = prediction_se(fit, m, x_eval)
            entry = fit.to_dict()
            entry["predictions"] = [
                {"x": xv.tolist() if np.ndim(xv) else float(xv), "estimate": float(a),
                 "se": float(s), "lower": float(b), "upper": float(c)}
                for xv, a, s, b, c in zip(x_eval, g, se, lo, hi)]
            result["targets"][t] = entry
    except BadFoldCount as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceFailure, EmptySubset, SingularDesign, PositivityViolation) as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    out = _outdir(cfg)
    _write_text(os.path.join(out, "estimate.json"), json.dumps(result, indent=2) + "\n")
    print(json.dumps({t: v["predictions"] for t, v in result["targets"].items()}, indent=2))
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help="worker processes for replicates")
    common.add_argument("--print-config", action="store_true",
                        help="print the resolved configuration and exit")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="medpc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    for name, helptext in (("table1", "reproduce the noise-injection simulation table"),
                           ("simulate", "run a custom simulation configuration")):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("--reps", type=int, help="number of replicates")
        sp.add_argument("--n", type=int, help="sample size per replicate")
        sp.add_argument("--pop-size", type=int, help="population size for the truth")
        if name == "simulate":
            sp.add_argument("--mode", choices=("noisy", "fitted"), help="nuisance mode")
        sp.set_defaults(func=cmd_table1, name=name if name == "table1" else "simulation")

    sp = sub.add_parser("figures", parents=[common], help="write curve tables")
    sp.add_argument("--grid-points", type=int)
    sp.set_defaults(func=cmd_figures)

    sp = sub.add_parser("oracle-check", parents=[common],
                        help="compare identifying formulas with exact enumeration")
    sp.set_defaults(func=cmd_oracle_check)

    sp = sub.add_parser("estimate", parents=[common], help="estimate projections from data")
    sp.add_argument("data", help="CSV with columns x, a, m, y")
    sp.set_defaults(func=cmd_estimate)
    return p


def _overrides(args):
    o = {"seed": args.seed, "out": args.out, "threads": args.threads}
    if getattr(args, "reps", None) is not None:
        o["simulation.n_reps"] = args.reps
    if getattr(args, "n", None) is not None:
        o["simulation.n"] = args.n
    if getattr(args, "pop_size", None) is not None:
        o["simulation.pop_size_truth"] = args.pop_size
    if getattr(args, "mode", None) is not None:
        o["simulation.nuisance_mode"] = args.mode
    if getattr(args, "grid_points", None) is not None:
        o["figures.grid_points"] = args.grid_points
    return o


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = cfgmod.resolve(args.config, _overrides(args))
        if args.print_config:
            print(json.dumps(cfg, indent=2))
            return EXIT_OK
        return args.func(cfg, args)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
