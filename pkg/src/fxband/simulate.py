"""Monte Carlo evaluation of band policies on the controlled process.

Paths follow the exact lognormal stepping of the two-regime model on a
fixed time grid: interventions trigger at grid times when the state sits
outside the band and the previous reaction window has expired, reset the
state to the restart point, charge the fixed cost, and draw a fresh
reaction (duration, volatility shift, drift shift).  Running cost is
accumulated per step from the geometric mid-point.  Everything is
deterministic given (seed, path index); paths are embarrassingly parallel
and reduced in path order, so (seed, n_paths) pins the output exactly.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernel
from ._kernel import (
    EV_INTERVENE,
    LAW_DISCRETE,
    LAW_POINT,
    LAW_UNIFORM,
    ZIG_FN,
    ZIG_KN,
    ZIG_KNF,
    ZIG_WN,
)
from .errors import DomainViolation
from .model import CostSpec, ModelParams, ReactionLaw, ScalarLaw


@dataclass(frozen=True)
class BandPolicy:
    """Intervene outside (a, b), restarting at alpha."""

    a: float
    b: float
    alpha: float

    def __post_init__(self):
        if not 0 < self.a < self.alpha < self.b:
            raise DomainViolation(
                f"need 0 < a < alpha < b, got {self.a}, {self.alpha}, {self.b}")


@dataclass(frozen=True)
class SimConfig:
    x0: float
    dt: float = 1e-3
    horizon: float = 250.0
    n_paths: int = 10_000
    seed: int = 123456789
    crn: bool = False

    def __post_init__(self):
        if not self.x0 > 0:
            raise ValueError(f"x0 must be positive, got {self.x0}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.horizon < self.dt:
            raise ValueError("horizon must cover at least one step")
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be >= 1, got {self.n_paths}")
        if not 0 <= int(self.seed) < 2**63:
            raise ValueError("seed must be a nonnegative 63-bit integer")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass(frozen=True)
class CostEstimate:
    mean: float
    stderr: float
    n_paths: int
    mean_interventions_per_unit_time: float


@dataclass(frozen=True)
class PathEvent:
    t: float
    event: str
    x_before: float
    x_after: float
    t_drawn: float
    sigma2_drawn: float
    mu2_drawn: float


@dataclass(frozen=True)
class PolicyComparison:
    """One row of a common-random-number policy ranking."""

    policy: BandPolicy
    estimate: CostEstimate
    diff_vs_reference_mean: float
    diff_vs_reference_stderr: float


_EMPTY_F = np.empty(0, dtype=np.float64)
_EMPTY_I = np.empty(0, dtype=np.int64)


def _pack_law(law: ScalarLaw):
    if law.kind == "point":
        return LAW_POINT, law.value, 0.0, _EMPTY_F, _EMPTY_F
    if law.kind == "uniform":
        return LAW_UNIFORM, law.lo, law.hi, _EMPTY_F, _EMPTY_F
    cum = np.cumsum(np.asarray(law.probs, dtype=np.float64))
    cum[-1] = 1.0
    return LAW_DISCRETE, 0.0, 0.0, np.asarray(law.values, dtype=np.float64), cum


def _grid_tables(params: ModelParams, cfg: SimConfig):
    n = cfg.n_steps
    disc = np.exp(-params.r * cfg.dt * np.arange(n + 1))
    wmid = np.exp(-params.r * cfg.dt * (np.arange(n) + 0.5)) * cfg.dt
    return n, disc, wmid


def _check_horizon(params: ModelParams, cfg: SimConfig):
    if cfg.horizon < 10.0 / params.r:
        warnings.warn(
            f"horizon {cfg.horizon} is below the recommended 10/r = "
            f"{10.0 / params.r:.1f}; the discounted tail may not be negligible",
            stacklevel=3)


def _kernel_args(policy: BandPolicy, params: ModelParams, law: ReactionLaw,
                 cost: CostSpec, cfg: SimConfig):
    law.validate_against(params)
    n, disc, wmid = _grid_tables(params, cfg)
    t_pack = _pack_law(law.t_law)
    s_pack = _pack_law(law.sigma_shift_law)
    m_pack = _pack_law(law.mu_shift_law)
    return ((n, cfg.dt, cfg.x0, policy.a, policy.b, policy.alpha, params.rho,
             cost.k_fixed, params.mu, params.sigma)
            + t_pack + s_pack + m_pack
            + (disc, wmid, ZIG_KN, ZIG_KNF, ZIG_WN, ZIG_FN))


def simulate_path(policy: BandPolicy, params: ModelParams, law: ReactionLaw,
                  cost: CostSpec, cfg: SimConfig, path_index: int = 0):
    """Discounted cost and intervention count of a single path.

    The path is identical to path ``path_index`` of ``estimate_cost`` run
    with the same seed.
    """
    args = _kernel_args(policy, params, law, cost, cfg)
    c, n, _ = _kernel._simulate_one(
        np.uint64(cfg.seed), np.uint64(path_index), *args,
        0, _EMPTY_I, _EMPTY_F, _EMPTY_F, _EMPTY_F, _EMPTY_F, _EMPTY_F, _EMPTY_F)
    return float(c), int(n)


def simulate_path_events(policy: BandPolicy, params: ModelParams,
                         law: ReactionLaw, cost: CostSpec, cfg: SimConfig,
                         path_index: int = 0, max_events: int = 100_000):
    """Like ``simulate_path`` but also returns the event log."""
    args = _kernel_args(policy, params, law, cost, cfg)
    ev_type = np.empty(max_events, dtype=np.int64)
    ev = [np.empty(max_events, dtype=np.float64) for _ in range(6)]
    c, n, nev = _kernel._simulate_one(
        np.uint64(cfg.seed), np.uint64(path_index), *args,
        max_events, ev_type, ev[0], ev[1], ev[2], ev[3], ev[4], ev[5])
    if n > 0 and nev >= max_events:
        warnings.warn(f"event log truncated at {max_events} records")
    events = [
        PathEvent(
            t=float(ev[0][i]),
            event="intervene" if ev_type[i] == EV_INTERVENE else "reaction_end",
            x_before=float(ev[1][i]),
            x_after=float(ev[2][i]),
            t_drawn=float(ev[3][i]),
            sigma2_drawn=float(ev[4][i]),
            mu2_drawn=float(ev[5][i]),
        )
        for i in range(nev)
    ]
    return float(c), int(n), events


def estimate_cost(policy: BandPolicy, params: ModelParams, law: ReactionLaw,
                  cost: CostSpec, cfg: SimConfig) -> CostEstimate:
    """Mean discounted cost over ``cfg.n_paths`` independent paths."""
    _check_horizon(params, cfg)
    args = _kernel_args(policy, params, law, cost, cfg)
    out_cost = np.empty(cfg.n_paths, dtype=np.float64)
    out_nint = np.empty(cfg.n_paths, dtype=np.int64)
    _kernel._simulate_many(np.uint64(cfg.seed), np.uint64(0), cfg.n_paths,
                           *args, out_cost, out_nint)
    return _estimate_from_draws(out_cost, out_nint, cfg)


def _estimate_from_draws(costs, nints, cfg) -> CostEstimate:
    mean = float(np.mean(costs))
    stderr = (float(np.std(costs, ddof=1)) / math.sqrt(len(costs))
              if len(costs) > 1 else 0.0)
    rate = float(np.sum(nints)) / (cfg.n_paths * cfg.n_steps * cfg.dt)
    return CostEstimate(mean=mean, stderr=stderr, n_paths=len(costs),
                        mean_interventions_per_unit_time=rate)


def _policy_costs(policy, params, law, cost, cfg):
    args = _kernel_args(policy, params, law, cost, cfg)
    out_cost = np.empty(cfg.n_paths, dtype=np.float64)
    out_nint = np.empty(cfg.n_paths, dtype=np.int64)
    _kernel._simulate_many(np.uint64(cfg.seed), np.uint64(0), cfg.n_paths,
                           *args, out_cost, out_nint)
    return out_cost, out_nint


def compare_policies(policies, params: ModelParams, law: ReactionLaw,
                     cost: CostSpec, cfg: SimConfig):
    """Rank policies on common random numbers.

    All policies consume identical per-step normals and per-intervention
    reaction draws, so paired differences are far tighter than the
    individual estimates.  The first policy is the reference for the
    difference columns.  Returns rows sorted by estimated cost.
    """
    if not cfg.crn:
        raise DomainViolation("compare_policies requires cfg.crn = True")
    if not policies:
        raise ValueError("need at least one policy")
    _check_horizon(params, cfg)
    all_costs = []
    all_nints = []
    for pol in policies:
        c, n = _policy_costs(pol, params, law, cost, cfg)
        all_costs.append(c)
        all_nints.append(n)
    ref = all_costs[0]
    rows = []
    for pol, c, n in zip(policies, all_costs, all_nints):
        d = c - ref
        dmean = float(np.mean(d))
        dse = (float(np.std(d, ddof=1)) / math.sqrt(len(d))
               if len(d) > 1 and pol is not policies[0] else 0.0)
        rows.append(PolicyComparison(
            policy=pol,
            estimate=_estimate_from_draws(c, n, cfg),
            diff_vs_reference_mean=dmean,
            diff_vs_reference_stderr=dse,
        ))
    rows.sort(key=lambda row: row.estimate.mean)
    return rows


def write_event_log(fileobj, events_by_path):
    """CSV event log: one row per event, path-major order."""
    writer = csv.writer(fileobj)
    writer.writerow(["path", "t", "event", "x_before", "x_after",
                     "T_drawn", "sigma2_drawn", "mu2_drawn"])
    for path_index, events in events_by_path:
        for e in events:
            writer.writerow([path_index, repr(e.t), e.event, repr(e.x_before),
                             repr(e.x_after), repr(e.t_drawn),
                             repr(e.sigma2_drawn), repr(e.mu2_drawn)])
