"""Damped-Newton solution of the five-equation free-boundary system.

Unknowns are the two homogeneous weights (A, B), the band edges (a, b)
and the restart point alpha.  The five residuals are value matching at
both edges against the intervention value, smooth pasting at both edges,
and stationarity of the intervention value in alpha.  Newton runs in the
reparametrized coordinates (A, B, log a, log(alpha - a), log(b - alpha))
so the ordering 0 < a < alpha < b can never be violated, with a numerical
Jacobian by central differences and step halving for globalization.

Cold starts come from the no-reaction baseline, which itself is
initialized by a two-dimensional reduction: for trial edges (a, b) the
weights follow from the linear smooth-pasting system and the restart
point from a one-dimensional root find, leaving two residuals in two
unknowns.  When a cold start fails for strong reactions, a homotopy in
reaction strength walks from the baseline to the target law.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainViolation, NoConvergence, OrderingCollapse
from .expectation import (
    BandValue,
    ReactionNodes,
    build_nodes,
    d_dalpha_expected_phi_after,
    d_dalpha_expected_reaction_cost,
    expected_phi_after,
    expected_reaction_cost,
)
from .model import (
    CostSpec,
    ModelParams,
    ReactionLaw,
    ScalarLaw,
    ValueCoeffs,
    build_coeffs,
    gamma_roots,
    generator_apply,
    particular_coeffs,
    phi,
)

MAX_HALVINGS = 30
VERIFY_ODE_TOL = 1e-6
VERIFY_SMOOTH_TOL = 1e-9
VERIFY_THETA_TOL = 1e-9
VERIFY_GRID_INBAND = 10_000
VERIFY_GRID_OUTSIDE = 1_000


@dataclass(frozen=True)
class SolverConfig:
    tol_residual: float = 1e-9
    max_iter: int = 60
    fd_step: float = 1e-6
    n_inner: int = 200
    n_quad: int = 32
    homotopy_steps: int = 4

    def __post_init__(self):
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.homotopy_steps < 1:
            raise ValueError("homotopy_steps must be >= 1")


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    margin: float


@dataclass(frozen=True)
class VerificationReport:
    """Per-condition outcomes with signed margins (positive = satisfied)."""

    checks: dict

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def as_dict(self):
        return {k: {"passed": bool(c.passed), "margin": float(c.margin)}
                for k, c in self.checks.items()}


@dataclass(frozen=True)
class PolicySolution:
    """A converged band policy: coefficients, band, restart point, diagnostics."""

    coeffs: ValueCoeffs
    a: float
    b: float
    alpha: float
    theta: float
    residual_norm: float
    iterations: int
    verified: VerificationReport | None = None

    def __post_init__(self):
        if not 0 < self.a < self.alpha < self.b:
            raise DomainViolation(
                f"need 0 < a < alpha < b, got {self.a}, {self.alpha}, {self.b}")


def residuals(u, params: ModelParams, cost: CostSpec, nodes: ReactionNodes,
              n_inner: int = 200) -> np.ndarray:
    """Residual vector of the free-boundary system at physical unknowns.

    ``u`` is (A, B, a, b, alpha) with 0 < a < alpha < b.  Components:
    value match at a, value match of b against a, smooth pasting at a and
    b, and the alpha-stationarity of the intervention value.  The outside
    level used in tail masses is phi(a) at the current trial point.
    """
    A, B, a, b, alpha = (float(v) for v in u)
    if not (0 < a < alpha < b):
        raise DomainViolation(f"need 0 < a < alpha < b, got {u!r}")
    coeffs = build_coeffs(params, A, B)
    theta = float(phi(coeffs, a))
    band = BandValue(a=a, b=b, theta=theta, coeffs=coeffs)
    value_if_intervene = (cost.k_fixed
                          + expected_reaction_cost(alpha, nodes, params)
                          + expected_phi_after(band, alpha, nodes, n_inner))
    dalpha = (d_dalpha_expected_reaction_cost(alpha, nodes, params)
              + d_dalpha_expected_phi_after(band, alpha, nodes, n_inner))
    return np.array([
        theta - value_if_intervene,
        float(phi(coeffs, b)) - theta,
        float(phi(coeffs, a, 1)),
        float(phi(coeffs, b, 1)),
        dalpha,
    ])


# --- internal Newton machinery -------------------------------------------

def _pack(A, B, a, b, alpha):
    return np.array([A, B, math.log(a), math.log(alpha - a), math.log(b - alpha)])


def _unpack(z):
    if not np.all(np.isfinite(z)):
        raise OrderingCollapse(f"non-finite iterate {z!r}")
    if z[3] < -34.0 or z[4] < -34.0:
        raise OrderingCollapse(
            f"band gap underflow: log(alpha - a) = {z[3]:.2f}, "
            f"log(b - alpha) = {z[4]:.2f}")
    a = math.exp(z[2])
    alpha = a + math.exp(z[3])
    b = alpha + math.exp(z[4])
    return np.array([z[0], z[1], a, b, alpha])


def _newton(z0, params, cost, nodes, config, trace=None):
    """Damped Newton in reparametrized coordinates; returns (z, norm, iters)."""
    trace = trace if trace is not None else []

    def res(z):
        return residuals(_unpack(z), params, cost, nodes, config.n_inner)

    z = np.asarray(z0, dtype=float).copy()
    r = res(z)
    nrm = float(np.linalg.norm(r))
    for it in range(config.max_iter):
        trace.append(nrm)
        if nrm < config.tol_residual:
            return z, nrm, it
        J = np.empty((5, 5))
        for j in range(5):
            h = config.fd_step * max(1.0, abs(z[j]))
            zp, zm = z.copy(), z.copy()
            zp[j] += h
            zm[j] -= h
            J[:, j] = (res(zp) - res(zm)) / (2.0 * h)
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"singular Jacobian: {exc}", trace) from exc
        damp = 1.0
        for _ in range(MAX_HALVINGS):
            z_new = z + damp * step
            try:
                r_new = res(z_new)
            except (OrderingCollapse, FloatingPointError, OverflowError):
                damp *= 0.5
                continue
            n_new = float(np.linalg.norm(r_new))
            if math.isfinite(n_new) and n_new < nrm:
                z, r, nrm = z_new, r_new, n_new
                break
            damp *= 0.5
        else:
            raise NoConvergence(
                f"line search stalled at residual norm {nrm:.3e}", trace)
    trace.append(nrm)
    if nrm < config.tol_residual:
        return z, nrm, config.max_iter
    raise NoConvergence(
        f"no convergence after {config.max_iter} iterations "
        f"(residual norm {nrm:.3e})", trace)


# --- baseline (no reaction) initialization --------------------------------

def _pasting_weights(params, a, b):
    """(A, B) solving the linear smooth-pasting system at trial edges."""
    g1, g2 = gamma_roots(params)
    c2, c1, _ = particular_coeffs(params)
    M = np.array([[g2 * a**(g2 - 1), g1 * a**(g1 - 1)],
                  [g2 * b**(g2 - 1), g1 * b**(g1 - 1)]])
    rhs = -np.array([2 * c2 * a + c1, 2 * c2 * b + c1])
    return np.linalg.solve(M, rhs)


def _interior_minimum(coeffs, a, b):
    """The zero of phi' strictly inside (a, b), or None if no sign change."""
    xs = np.linspace(a, b, 66)[1:-1]
    d = phi(coeffs, xs, 1)
    sign_flip = np.nonzero((d[:-1] < 0) & (d[1:] > 0))[0]
    if sign_flip.size == 0:
        return None
    i = int(sign_flip[0])
    return brentq(lambda x: float(phi(coeffs, x, 1)), xs[i], xs[i + 1],
                  xtol=1e-14, rtol=1e-14)


def _t0_residual_pair(params, cost, a, b):
    """Residuals (value match at a, edge equality) of the reduced system."""
    A, B = _pasting_weights(params, a, b)
    coeffs = build_coeffs(params, A, B)
    alpha = _interior_minimum(coeffs, a, b)
    if alpha is None:
        return None
    r1 = float(phi(coeffs, a)) - cost.k_fixed - float(phi(coeffs, alpha))
    r2 = float(phi(coeffs, b)) - float(phi(coeffs, a))
    return np.array([r1, r2]), A, B, alpha


def _t0_initial_guess(params, cost):
    """Solve the reduced two-equation system for a full-system start point."""

    def res(v):
        a = math.exp(v[0])
        b = a + math.exp(v[1])
        out = _t0_residual_pair(params, cost, a, b)
        return None if out is None else out[0]

    def try_newton(v):
        r = res(v)
        if r is None:
            return None
        for _ in range(80):
            nrm = float(np.linalg.norm(r))
            if nrm < 1e-11:
                return v
            J = np.empty((2, 2))
            ok = True
            for j in range(2):
                h = 1e-7 * max(1.0, abs(v[j]))
                vp, vm = v.copy(), v.copy()
                vp[j] += h
                vm[j] -= h
                rp, rm = res(vp), res(vm)
                if rp is None or rm is None:
                    ok = False
                    break
                J[:, j] = (rp - rm) / (2 * h)
            if not ok:
                return None
            try:
                step = np.linalg.solve(J, -r)
            except np.linalg.LinAlgError:
                return None
            damp = 1.0
            for _ in range(40):
                v_new = v + damp * step
                r_new = res(v_new)
                if r_new is not None and np.linalg.norm(r_new) < nrm:
                    v, r = v_new, r_new
                    break
                damp *= 0.5
            else:
                return None
        return v

    rho = params.rho
    v = try_newton(np.array([math.log(0.45 * rho), math.log(1.15 * rho)]))
    if v is None:
        # coarse feasibility scan, then retry from the best cell
        best, best_nrm = None, math.inf
        for fa in np.linspace(0.15, 0.9, 14):
            for fw in np.linspace(0.3, 3.0, 14):
                out = _t0_residual_pair(params, cost, fa * rho, (fa + fw) * rho)
                if out is None:
                    continue
                nrm = float(np.linalg.norm(out[0]))
                if nrm < best_nrm:
                    best_nrm = nrm
                    best = np.array([math.log(fa * rho), math.log(fw * rho)])
        if best is None:
            raise NoConvergence(
                "baseline initialization found no feasible band", [])
        v = try_newton(best)
        if v is None:
            raise NoConvergence(
                "baseline initialization did not converge", [best_nrm])
    a = math.exp(v[0])
    b = a + math.exp(v[1])
    _, A, B, alpha = _t0_residual_pair(params, cost, a, b)
    return _pack(A, B, a, b, alpha)


# --- public solve entry points ---------------------------------------------

def solve_t0(params: ModelParams, cost: CostSpec,
             config: SolverConfig | None = None) -> PolicySolution:
    """Optimal band policy of the no-reaction baseline.

    This is both a deliverable policy in its own right and the cold-start
    point for the full problem.
    """
    config = config or SolverConfig()
    nodes = build_nodes(ReactionLaw.none(), 1, params)
    trace = []
    z0 = _t0_initial_guess(params, cost)
    z, nrm, iters = _newton(z0, params, cost, nodes, config, trace)
    return _assemble(z, nrm, iters, params, cost, nodes, config)


def _scale_law(law: ReactionLaw, lam: float) -> ReactionLaw:
    """Shrink the reaction toward the no-reaction baseline by factor lam."""

    def scale(sl: ScalarLaw) -> ScalarLaw:
        if sl.kind == "point":
            return ScalarLaw.point(lam * sl.value)
        if sl.kind == "uniform":
            return ScalarLaw.uniform(lam * sl.lo, lam * sl.hi)
        return ScalarLaw.discrete(tuple(lam * v for v in sl.values), sl.probs)

    return ReactionLaw(scale(law.t_law), scale(law.sigma_shift_law),
                       scale(law.mu_shift_law))


def solve(params: ModelParams, cost: CostSpec, law: ReactionLaw,
          config: SolverConfig | None = None) -> PolicySolution:
    """Optimal band policy under the given market-reaction law.

    Newton starts from the no-reaction solution; if that diverges (strong
    reactions), a homotopy scales the reaction law from zero to its target
    in ``config.homotopy_steps`` stages, warm-starting each stage.
    """
    config = config or SolverConfig()
    law.validate_against(params)
    if law.is_zero:
        return solve_t0(params, cost, config)
    nodes = build_nodes(law, config.n_quad, params)
    base = solve_t0(params, cost, config)
    z0 = _pack(base.coeffs.a_coef, base.coeffs.b_coef, base.a, base.b, base.alpha)
    trace = []
    try:
        z, nrm, iters = _newton(z0, params, cost, nodes, config, trace)
    except (NoConvergence, OrderingCollapse):
        z = z0
        iters = 0
        for lam in np.linspace(1.0 / config.homotopy_steps, 1.0,
                               config.homotopy_steps):
            nodes_lam = build_nodes(_scale_law(law, float(lam)), config.n_quad,
                                    params)
            z, nrm, it = _newton(z, params, cost, nodes_lam, config, trace)
            iters += it
    return _assemble(z, nrm, iters, params, cost, nodes, config)


def _assemble(z, nrm, iters, params, cost, nodes, config) -> PolicySolution:
    A, B, a, b, alpha = _unpack(z)
    coeffs = build_coeffs(params, A, B)
    theta = float(phi(coeffs, a))
    sol = PolicySolution(coeffs=coeffs, a=a, b=b, alpha=alpha, theta=theta,
                         residual_norm=nrm, iterations=iters)
    report = verify(sol, params, cost, nodes, config)
    return dataclasses.replace(sol, verified=report)


# --- verification -----------------------------------------------------------

def verify(sol: PolicySolution, params: ModelParams, cost: CostSpec,
           nodes: ReactionNodes, config: SolverConfig | None = None
           ) -> VerificationReport:
    """Check the optimality conditions of a converged solution.

    Grid checks report signed margins (positive means satisfied with room):
    the two band-placement inequalities, the restart value lying strictly
    below the outside level, the in-band ODE residual, nonnegativity of the
    generator residual outside the band, the candidate value staying below
    the outside level on the band, and smooth pasting.  Failures are
    reported, never raised.
    """
    config = config or SolverConfig()
    coeffs, a, b, alpha, theta = sol.coeffs, sol.a, sol.b, sol.alpha, sol.theta
    rho, r = params.rho, params.r
    checks = {}

    half_width = math.sqrt(r * theta) if theta > 0 else math.nan
    m_lo = (rho - half_width) - a
    m_hi = b - (rho + half_width)
    checks["cond_lower"] = CheckResult(m_lo > 0, m_lo)
    checks["cond_upper"] = CheckResult(m_hi > 0, m_hi)

    m_restart = theta - float(phi(coeffs, alpha))
    checks["restart_value"] = CheckResult(m_restart > 0, m_restart)

    x_in = np.linspace(a, b, VERIFY_GRID_INBAND + 2)[1:-1]
    ode_resid = float(np.max(np.abs(generator_apply(coeffs, params, x_in)
                                    + (x_in - rho) ** 2)))
    checks["ode_inband"] = CheckResult(ode_resid < VERIFY_ODE_TOL,
                                       VERIFY_ODE_TOL - ode_resid)

    x_left = np.linspace(0.01 * a, a, VERIFY_GRID_OUTSIDE)
    x_right = np.linspace(b, 2.0 * b, VERIFY_GRID_OUTSIDE)
    outside = np.concatenate([(x_left - rho) ** 2, (x_right - rho) ** 2]) - r * theta
    m_out = float(np.min(outside))
    checks["outside_band"] = CheckResult(m_out >= -1e-12, m_out)

    m_theta = float(np.min(theta - phi(coeffs, x_in)))
    checks["phi_below_theta"] = CheckResult(m_theta > -VERIFY_THETA_TOL, m_theta)

    sp = max(abs(float(phi(coeffs, a, 1))), abs(float(phi(coeffs, b, 1))))
    checks["smooth_pasting"] = CheckResult(sp < VERIFY_SMOOTH_TOL,
                                           VERIFY_SMOOTH_TOL - sp)
    return VerificationReport(checks=checks)


def value_function(sol: PolicySolution, x):
    """The solved value: the candidate function on [a, b], theta outside."""
    x_arr = np.asarray(x, dtype=float)
    inside = (x_arr >= sol.a) & (x_arr <= sol.b)
    safe = np.where(inside, x_arr, sol.alpha)
    out = np.where(inside, phi(sol.coeffs, safe), sol.theta)
    return out if out.ndim else float(out)


def calibrate_cost_to_band(params: ModelParams, a_target: float, b_target: float,
                           k_lo: float, k_hi: float,
                           config: SolverConfig | None = None):
    """Fixed cost whose no-reaction band best matches (a_target, b_target).

    Minimizes the squared band mismatch over the bracket [k_lo, k_hi] and
    returns (k, solution).  One scalar knob cannot usually match both edges
    exactly; this is the least-squares compromise.
    """
    from scipy.optimize import minimize_scalar

    config = config or SolverConfig()

    def mismatch(k):
        s = solve_t0(params, CostSpec(k_fixed=float(k)), config)
        return (s.a - a_target) ** 2 + (s.b - b_target) ** 2

    res = minimize_scalar(mismatch, bounds=(k_lo, k_hi), method="bounded",
                          options={"xatol": 1e-10})
    k_star = float(res.x)
    return k_star, solve_t0(params, CostSpec(k_fixed=k_star), config)


def solution_to_json_dict(sol: PolicySolution) -> dict:
    """Flat serialization: {A, B, a, b, alpha, theta, residual_norm, checks}."""
    return {
        "A": sol.coeffs.a_coef,
        "B": sol.coeffs.b_coef,
        "a": sol.a,
        "b": sol.b,
        "alpha": sol.alpha,
        "theta": sol.theta,
        "residual_norm": sol.residual_norm,
        "checks": sol.verified.as_dict() if sol.verified is not None else {},
    }
