"""Quadrature evaluation of the intervention operator's ingredients.

The value of intervening is a fixed cost plus two expectations over the
reaction draw (duration, volatility shift, drift shift): the running cost
accumulated during the reaction window, and the discounted candidate value
at the window's end.  The reaction laws are discretized into weighted
nodes once; the inner (lognormal) expectation is then a smooth integral
over the band done by Gauss-Legendre in log coordinates, with the two
tails handled exactly because the candidate value is constant outside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtr

from .errors import UnsupportedLaw
from .model import (
    CostSpec,
    ModelParams,
    ReactionLaw,
    ScalarLaw,
    ValueCoeffs,
    ktilde_dx,
    ktilde_fixed,
    phi,
)

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ReactionNodes:
    """Weighted discretization of the joint reaction law.

    Parallel arrays: node i carries duration t[i], absolute reaction
    coefficients sigma2[i] / mu2[i], probability weight w[i] (summing to 1),
    and the discount factor disc[i] = exp(-r t[i]).
    """

    t: np.ndarray
    sigma2: np.ndarray
    mu2: np.ndarray
    w: np.ndarray
    disc: np.ndarray

    def __len__(self):
        return self.t.shape[0]


@dataclass(frozen=True)
class BandValue:
    """A candidate band (a, b) with its outside value theta and coefficients."""

    a: float
    b: float
    theta: float
    coeffs: ValueCoeffs

    def __post_init__(self):
        if not 0 < self.a < self.b:
            raise ValueError(f"need 0 < a < b, got a={self.a}, b={self.b}")


@lru_cache(maxsize=32)
def _leggauss(n: int):
    y, w = np.polynomial.legendre.leggauss(n)
    y.setflags(write=False)
    w.setflags(write=False)
    return y, w


def _marginal_nodes(law: ScalarLaw, n_quad: int):
    """Discretize one scalar law into (values, weights)."""
    if law.kind == "point":
        return np.array([law.value]), np.array([1.0])
    if law.kind == "discrete":
        return np.array(law.values), np.array(law.probs)
    if law.kind == "uniform":
        y, w = _leggauss(n_quad)
        mid, half = 0.5 * (law.hi + law.lo), 0.5 * (law.hi - law.lo)
        return mid + half * y, 0.5 * w
    raise UnsupportedLaw(f"cannot discretize law kind {law.kind!r}")


def build_nodes(law: ReactionLaw, n_quad: int, params: ModelParams) -> ReactionNodes:
    """Tensor-product quadrature over the three independent marginals.

    Point laws contribute a single node, discrete laws their support, and
    uniform laws ``n_quad`` Gauss-Legendre points.  Shift values are turned
    into absolute reaction coefficients using the base parameters.
    """
    if n_quad < 1:
        raise ValueError(f"n_quad must be >= 1, got {n_quad}")
    law.validate_against(params)
    tv, tw = _marginal_nodes(law.t_law, n_quad)
    sv, sw = _marginal_nodes(law.sigma_shift_law, n_quad)
    mv, mw = _marginal_nodes(law.mu_shift_law, n_quad)
    t = np.repeat(tv, len(sv) * len(mv))
    s2 = np.tile(np.repeat(params.sigma + sv, len(mv)), len(tv))
    m2 = np.tile(params.mu + mv, len(tv) * len(sv))
    w = np.kron(tw, np.kron(sw, mw))
    return ReactionNodes(t=t, sigma2=s2, mu2=m2, w=w, disc=np.exp(-params.r * t))


def _phi_clamped(band: BandValue, x: float) -> float:
    """The candidate value extended by its constant outside level."""
    if band.a < x < band.b:
        return float(phi(band.coeffs, x))
    return band.theta


def _node_value(band: BandValue, alpha: float, t: float, sigma2: float,
                mu2: float, n_inner: int) -> float:
    """E[phi_ext(X(t))] for one node, X the reaction process started at alpha."""
    var = sigma2 * sigma2 * t
    if var == 0.0:
        return _phi_clamped(band, alpha * math.exp(mu2 * t))
    m = math.log(alpha) + (mu2 - 0.5 * sigma2 * sigma2) * t
    sd = math.sqrt(var)
    ya, yb = math.log(band.a), math.log(band.b)
    gy, gw = _leggauss(n_inner)
    y = 0.5 * (yb - ya) * gy + 0.5 * (ya + yb)
    z = (y - m) / sd
    dens = np.exp(-0.5 * z * z) / (sd * SQRT_2PI)
    inner = 0.5 * (yb - ya) * float(np.dot(gw, phi(band.coeffs, np.exp(y)) * dens))
    za, zb = (ya - m) / sd, (yb - m) / sd
    tail = 1.0 - (ndtr(zb) - ndtr(za))
    return inner + band.theta * tail


def _node_dalpha(band: BandValue, alpha: float, t: float, sigma2: float,
                 mu2: float, n_inner: int) -> float:
    """d/d alpha of ``_node_value``, by differentiating the density."""
    var = sigma2 * sigma2 * t
    if var == 0.0:
        x = alpha * math.exp(mu2 * t)
        if band.a < x < band.b:
            return float(phi(band.coeffs, x, 1)) * math.exp(mu2 * t)
        return 0.0
    m = math.log(alpha) + (mu2 - 0.5 * sigma2 * sigma2) * t
    sd = math.sqrt(var)
    ya, yb = math.log(band.a), math.log(band.b)
    gy, gw = _leggauss(n_inner)
    y = 0.5 * (yb - ya) * gy + 0.5 * (ya + yb)
    z = (y - m) / sd
    dens = np.exp(-0.5 * z * z) / (sd * SQRT_2PI)
    ddens = dens * (y - m) / (var * alpha)
    inner = 0.5 * (yb - ya) * float(np.dot(gw, phi(band.coeffs, np.exp(y)) * ddens))
    za, zb = (ya - m) / sd, (yb - m) / sd
    npdf_a = math.exp(-0.5 * za * za) / SQRT_2PI
    npdf_b = math.exp(-0.5 * zb * zb) / SQRT_2PI
    dtail = (npdf_b - npdf_a) / (alpha * sd)
    return inner + band.theta * dtail


def expected_phi_after(band: BandValue, alpha: float, nodes: ReactionNodes,
                       n_inner: int) -> float:
    """Expected discounted candidate value at the end of the reaction window.

    Averages e^{-r t} E[phi_ext(X_alpha(t))] over the reaction nodes, where
    phi_ext equals the candidate value on (a, b) and theta outside.  Zero
    variance nodes (t = 0 or sigma2 = 0) short-circuit to the point-mass
    value instead of evaluating a degenerate density.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    total = 0.0
    for i in range(len(nodes)):
        total += nodes.w[i] * nodes.disc[i] * _node_value(
            band, alpha, nodes.t[i], nodes.sigma2[i], nodes.mu2[i], n_inner)
    return total


def d_dalpha_expected_phi_after(band: BandValue, alpha: float,
                                nodes: ReactionNodes, n_inner: int) -> float:
    """Analytic derivative of ``expected_phi_after`` with respect to alpha."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    total = 0.0
    for i in range(len(nodes)):
        total += nodes.w[i] * nodes.disc[i] * _node_dalpha(
            band, alpha, nodes.t[i], nodes.sigma2[i], nodes.mu2[i], n_inner)
    return total


def expected_reaction_cost(alpha: float, nodes: ReactionNodes,
                           params: ModelParams) -> float:
    """Reaction-window running cost averaged over the nodes."""
    return sum(nodes.w[i] * ktilde_fixed(alpha, nodes.t[i], nodes.sigma2[i],
                                         nodes.mu2[i], params)
               for i in range(len(nodes)))


def d_dalpha_expected_reaction_cost(alpha: float, nodes: ReactionNodes,
                                    params: ModelParams) -> float:
    return sum(nodes.w[i] * ktilde_dx(alpha, nodes.t[i], nodes.sigma2[i],
                                      nodes.mu2[i], params)
               for i in range(len(nodes)))


def intervention_value(band: BandValue, alpha: float, nodes: ReactionNodes,
                       cost: CostSpec, params: ModelParams,
                       n_inner: int = 200) -> float:
    """Total value of intervening now and restarting at alpha.

    Fixed cost + expected reaction running cost + expected discounted
    continuation value.  With fixed costs this does not depend on the
    pre-intervention state.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return (cost.k_fixed + expected_reaction_cost(alpha, nodes, params)
            + expected_phi_after(band, alpha, nodes, n_inner))
