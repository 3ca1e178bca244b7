"""JSON run configuration: defaults, strict merging and conversion."""

from __future__ import annotations

import copy
import json

from .basis import parse_basis
from .estimands import NUISANCE_NAMES
from .montecarlo import SimulationConfig
from .projection import ProjectionModel
from .world import Curve, DgpSpec


class ConfigError(ValueError):
    pass


def _default_dgp():
    return DgpSpec().to_dict()


DEFAULTS = {
    "seed": 20240607,
    "out": "results",
    "threads": 1,
    "dgp": _default_dgp(),
    "projection": {"basis": "linear", "link": "identity"},
    "simulation": {
        "n_reps": 1000,
        "n": 1000,
        "alpha_rates": [0.3, 0.1],
        "c1": 1.0,
        "c2": 1.0,
        "noise_mode": "per_point",
        "eval_x": 0.75,
        "targets": ["psi", "delta", "zeta"],
        "pop_size_truth": 10_000_000,
        "nuisance_mode": "noisy",
        "nuisance_basis": "poly:3",
        "k_folds": 2,
        "level": 0.95,
        "variant": "corrected",
        "truth_method": "population",
    },
    "figures": {"grid_points": 201},
    "oracle": {"grid_points": 21, "tol": 1e-10, "violation_threshold": 0.01},
    "estimate": {
        "targets": ["psi", "delta", "zeta"],
        "x_eval": [0.25, 0.5, 0.75],
        "k_folds": 2,
        "nuisance_basis": "poly:3",
        "projection_basis": "linear",
        "level": 0.95,
        "variant": "corrected",
    },
}

# keys whose value is a free-form mapping (e.g. per-nuisance constants)
_OPEN = {"simulation.c1", "simulation.c2"}
_CURVE_KEYS = {"coefs", "link"}


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key '{where}'")
        if isinstance(base[key], dict) and where not in _OPEN:
            if not isinstance(val, dict):
                raise ConfigError(f"config key '{where}' must be an object")
            if path == "dgp." and set(base[key]) == _CURVE_KEYS:
                if "coefs" not in val:
                    raise ConfigError(f"missing config key '{where}.coefs'")
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = val
    return out


def resolve(path=None, overrides=None):
    """Defaults, then the JSON file at ``path``, then flat ``overrides``.

    ``overrides`` maps dotted keys (``"simulation.n_reps"``) to values.
    """
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config root must be a JSON object")
        cfg = _merge(cfg, user)
    for dotted, val in (overrides or {}).items():
        if val is None:
            continue
        node = {}
        cur = node
        parts = dotted.split(".")
        for p in parts[:-1]:
            cur[p] = {}
            cur = cur[p]
        cur[parts[-1]] = val
        cfg = _merge(cfg, node)
    return cfg


def dgp_from(cfg) -> DgpSpec:
    d = cfg["dgp"]
    try:
        curves = {name: Curve(tuple(d[name]["coefs"]), d[name].get("link", "identity"))
                  for name in DgpSpec.CURVES}
        return DgpSpec(**curves, enforce_monotonicity=bool(d["enforce_monotonicity"]),
                       y0_monotone=bool(d["y0_monotone"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid dgp: {exc}") from exc


def projection_from(cfg, basis_key="basis", section="projection") -> ProjectionModel:
    try:
        return ProjectionModel(basis=parse_basis(cfg[section][basis_key]),
                               link=cfg["projection"]["link"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def simulation_from(cfg) -> SimulationConfig:
    s = dict(cfg["simulation"])
    try:
        basis = parse_basis(s.pop("nuisance_basis"))
        c1, c2 = s.pop("c1"), s.pop("c2")
        c1 = _constants(c1, "c1")
        c2 = _constants(c2, "c2")
        return SimulationConfig(
            **{k: (tuple(v) if isinstance(v, list) else v) for k, v in s.items()},
            c1=_frozen(c1), c2=_frozen(c2),
            seed=int(cfg["seed"]), spec=dgp_from(cfg), model=projection_from(cfg),
            nuisance_basis=basis,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid simulation settings: {exc}") from exc


def _constants(c, key):
    if not isinstance(c, dict):
        return float(c)
    for name in c:
        if name not in NUISANCE_NAMES:
            raise ConfigError(f"unknown config key 'simulation.{key}.{name}'")
    for name in NUISANCE_NAMES:
        if name not in c:
            raise ConfigError(f"missing config key 'simulation.{key}.{name}'")
    return {k: float(c[k]) for k in NUISANCE_NAMES}


class _FrozenDict(dict):
    """Hashable mapping so configurations can key the truth cache."""

    def __hash__(self):
        return hash(tuple(sorted(self.items())))


def _frozen(c):
    return _FrozenDict(c) if isinstance(c, dict) else c
