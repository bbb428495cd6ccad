"""Problem-description files: strict JSON schema and loading.

A problem file holds the model parameters, the reaction law, the
intervention cost, and optional solver/simulation settings:

    {
      "model":    {"mu": 0.1, "sigma": 0.3, "r": 0.06, "rho": 1.4},
      "reaction": {"t": DIST, "sigma_shift": DIST, "mu_shift": DIST},
      "cost":     {"k_fixed": 0.5},
      "solver":   {...optional SolverConfig overrides...},
      "sim":      {...optional SimConfig overrides...}
    }

where DIST is one of

    {"type": "point", "value": v}
    {"type": "uniform", "lo": a, "hi": b}
    {"type": "discrete", "values": [...], "probs": [...]}

Unknown keys anywhere are errors, so typos cannot silently change the
problem.  All dataclass invariants are re-checked on load.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from numbers import Real

from .errors import ConfigError, FxbandError
from .model import CostSpec, ModelParams, ReactionLaw, ScalarLaw
from .simulate import SimConfig
from .solver import SolverConfig


@dataclass(frozen=True)
class ProblemConfig:
    params: ModelParams
    law: ReactionLaw
    cost: CostSpec
    solver: SolverConfig
    sim: SimConfig


def _require_mapping(obj, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object, got {type(obj).__name__}")


def _reject_unknown(obj, allowed, where):
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}; "
                          f"allowed: {sorted(allowed)}")


def _number(obj, key, where, required=True):
    if key not in obj:
        if required:
            raise ConfigError(f"missing key {key!r} in {where}")
        return None
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, Real):
        raise ConfigError(f"{where}.{key} must be a number, got {v!r}")
    return float(v)


def _scalar_law(obj, where):
    _require_mapping(obj, where)
    if "type" not in obj:
        raise ConfigError(f"missing key 'type' in {where}")
    kind = obj["type"]
    try:
        if kind == "point":
            _reject_unknown(obj, {"type", "value"}, where)
            return ScalarLaw.point(_number(obj, "value", where))
        if kind == "uniform":
            _reject_unknown(obj, {"type", "lo", "hi"}, where)
            return ScalarLaw.uniform(_number(obj, "lo", where),
                                     _number(obj, "hi", where))
        if kind == "discrete":
            _reject_unknown(obj, {"type", "values", "probs"}, where)
            values = obj.get("values")
            probs = obj.get("probs")
            if not isinstance(values, list) or not isinstance(probs, list):
                raise ConfigError(f"{where}: 'values' and 'probs' must be lists")
            return ScalarLaw.discrete(values, probs)
    except FxbandError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(f"{where}.type must be point|uniform|discrete, got {kind!r}")


def parse_problem(raw: dict) -> ProblemConfig:
    """Validate a parsed JSON document into a ProblemConfig."""
    _require_mapping(raw, "top level")
    _reject_unknown(raw, {"model", "reaction", "cost", "solver", "sim"},
                    "top level")
    for key in ("model", "reaction", "cost"):
        if key not in raw:
            raise ConfigError(f"missing required section {key!r}")

    m = raw["model"]
    _require_mapping(m, "model")
    _reject_unknown(m, {"mu", "sigma", "r", "rho"}, "model")
    try:
        params = ModelParams(mu=_number(m, "mu", "model"),
                             sigma=_number(m, "sigma", "model"),
                             r=_number(m, "r", "model"),
                             rho=_number(m, "rho", "model"))
    except FxbandError:
        raise
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc

    rx = raw["reaction"]
    _require_mapping(rx, "reaction")
    _reject_unknown(rx, {"t", "sigma_shift", "mu_shift"}, "reaction")
    for key in ("t", "sigma_shift", "mu_shift"):
        if key not in rx:
            raise ConfigError(f"missing key {key!r} in reaction")
    try:
        law = ReactionLaw(t_law=_scalar_law(rx["t"], "reaction.t"),
                          sigma_shift_law=_scalar_law(rx["sigma_shift"],
                                                      "reaction.sigma_shift"),
                          mu_shift_law=_scalar_law(rx["mu_shift"],
                                                   "reaction.mu_shift"))
        law.validate_against(params)
    except FxbandError:
        raise
    except ValueError as exc:
        raise ConfigError(f"reaction: {exc}") from exc

    c = raw["cost"]
    _require_mapping(c, "cost")
    _reject_unknown(c, {"k_fixed"}, "cost")
    try:
        cost = CostSpec(k_fixed=_number(c, "k_fixed", "cost"))
    except ValueError as exc:
        raise ConfigError(f"cost: {exc}") from exc

    def pick(section, key, where, default):
        v = _number(section, key, where, required=False)
        return default if v is None else v

    s = raw.get("solver", {})
    _require_mapping(s, "solver")
    _reject_unknown(s, {"tol_residual", "max_iter", "fd_step", "n_inner",
                        "n_quad", "homotopy_steps"}, "solver")
    try:
        solver = SolverConfig(
            tol_residual=pick(s, "tol_residual", "solver", 1e-9),
            max_iter=int(s.get("max_iter", 60)),
            fd_step=pick(s, "fd_step", "solver", 1e-6),
            n_inner=int(s.get("n_inner", 200)),
            n_quad=int(s.get("n_quad", 32)),
            homotopy_steps=int(s.get("homotopy_steps", 4)),
        )
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from exc

    sm = raw.get("sim", {})
    _require_mapping(sm, "sim")
    _reject_unknown(sm, {"x0", "dt", "horizon", "n_paths", "seed", "crn"},
                    "sim")
    crn = sm.get("crn", False)
    if not isinstance(crn, bool):
        raise ConfigError("sim.crn must be a boolean")
    try:
        sim = SimConfig(
            x0=pick(sm, "x0", "sim", params.rho),
            dt=pick(sm, "dt", "sim", 1e-3),
            horizon=pick(sm, "horizon", "sim", 250.0),
            n_paths=int(sm.get("n_paths", 10_000)),
            seed=int(sm.get("seed", 123456789)),
            crn=crn,
        )
    except ValueError as exc:
        raise ConfigError(f"sim: {exc}") from exc

    return ProblemConfig(params=params, law=law, cost=cost, solver=solver,
                         sim=sim)


def load_problem(path) -> ProblemConfig:
    """Read and validate a problem-description JSON file."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return parse_problem(raw)


def bundled_config_path(name: str):
    """Filesystem path of a packaged example configuration.

    Available names match the files in fxband/configs, e.g. "table1_t1".
    """
    if not name.endswith(".json"):
        name = name + ".json"
    ref = resources.files("fxband") / "configs" / name
    with resources.as_file(ref) as p:
        return p


def bundled_config_names():
    out = []
    for entry in (resources.files("fxband") / "configs").iterdir():
        if entry.name.endswith(".json"):
            out.append(entry.name[:-5])
    return sorted(out)
