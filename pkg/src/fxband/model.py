"""Closed-form primitives of the two-regime intervention model.

A central bank keeps an exchange rate near a target ``rho``.  Between
interventions the rate follows a geometric Brownian motion with drift
``mu`` and volatility ``sigma``; deviation is penalized at rate
``(x - rho)**2`` discounted at ``r``.  Each intervention costs a fixed
amount and tips the market into a temporary reaction regime: for a random
time ``t`` the rate follows altered coefficients ``(mu2, sigma2)`` and no
further intervention is allowed.

On the no-intervention band the candidate value function is

    phi(x) = a_coef * x**gamma2 + b_coef * x**gamma1
             + c2 * x**2 + c1 * x + c0,

where ``gamma1 > 0 > gamma2`` solve the characteristic equation of the
discounted generator and (c2, c1, c0) is the particular solution killing
the quadratic running cost.  This module provides those coefficients, the
function and its derivatives, the expected discounted running cost over a
reaction window, and the lognormal transition law of the reaction-regime
process.  Everything here is pure and thread-safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import DegenerateDenominator, DegenerateDistribution, UnsupportedLaw

#: Guard for the resonant denominators r - mu and r - sigma^2 - 2 mu.
EPS_DEN = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """Base-regime dynamics, discounting, and the target rate.

    mu    : drift rate of the base regime (per unit time)
    sigma : volatility of the base regime (per sqrt time)
    r     : discount rate (per unit time)
    rho   : target exchange rate
    """

    mu: float
    sigma: float
    r: float
    rho: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.r > 0:
            raise ValueError(f"r must be positive, got {self.r}")
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if abs(self.r - self.mu) < EPS_DEN:
            raise DegenerateDenominator(
                f"|r - mu| = {abs(self.r - self.mu):.3e} < {EPS_DEN:g}")
        if abs(self.r - self.sigma**2 - 2 * self.mu) < EPS_DEN:
            raise DegenerateDenominator(
                f"|r - sigma^2 - 2 mu| = "
                f"{abs(self.r - self.sigma**2 - 2 * self.mu):.3e} < {EPS_DEN:g}")


@dataclass(frozen=True)
class CostSpec:
    """Fixed cost charged per intervention."""

    k_fixed: float

    def __post_init__(self):
        if not self.k_fixed > 0:
            raise ValueError(f"k_fixed must be positive, got {self.k_fixed}")


@dataclass(frozen=True)
class ScalarLaw:
    """A scalar distribution: point mass, uniform interval, or finite discrete.

    Only the fields relevant to ``kind`` are meaningful.
    """

    kind: str
    value: float = 0.0
    lo: float = 0.0
    hi: float = 0.0
    values: tuple = ()
    probs: tuple = ()

    @classmethod
    def point(cls, value):
        return cls(kind="point", value=float(value))

    @classmethod
    def uniform(cls, lo, hi):
        lo, hi = float(lo), float(hi)
        if not lo < hi:
            raise ValueError(f"uniform law needs lo < hi, got [{lo}, {hi}]")
        return cls(kind="uniform", lo=lo, hi=hi)

    @classmethod
    def discrete(cls, values, probs):
        values = tuple(float(v) for v in values)
        probs = tuple(float(p) for p in probs)
        if len(values) != len(probs) or not values:
            raise ValueError("discrete law needs matching non-empty values/probs")
        if any(p <= 0 for p in probs):
            raise ValueError("discrete law probabilities must be positive")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError(f"discrete law probabilities sum to {sum(probs)!r}, not 1")
        return cls(kind="discrete", values=values, probs=probs)

    def __post_init__(self):
        if self.kind not in ("point", "uniform", "discrete"):
            raise UnsupportedLaw(f"unknown scalar law kind {self.kind!r}")

    def support(self):
        """(min, max) of the support."""
        if self.kind == "point":
            return self.value, self.value
        if self.kind == "uniform":
            return self.lo, self.hi
        return min(self.values), max(self.values)

    def mean(self):
        if self.kind == "point":
            return self.value
        if self.kind == "uniform":
            return 0.5 * (self.lo + self.hi)
        return sum(v * p for v, p in zip(self.values, self.probs))


@dataclass(frozen=True)
class ReactionLaw:
    """Joint law of the market reaction drawn iid at each intervention.

    ``t_law`` is the reaction duration; ``sigma_shift_law`` and
    ``mu_shift_law`` are additive shifts applied to the base volatility and
    drift during the reaction window.  The three marginals are independent.
    Durations must be nonnegative and bounded; the shifted volatility must
    stay positive, which is validated against concrete base parameters in
    ``validate_against``.
    """

    t_law: ScalarLaw
    sigma_shift_law: ScalarLaw
    mu_shift_law: ScalarLaw

    def __post_init__(self):
        t_lo, t_hi = self.t_law.support()
        if t_lo < 0:
            raise ValueError(f"reaction durations must be >= 0, support min {t_lo}")
        if not math.isfinite(t_hi):
            raise ValueError("reaction durations must be bounded")

    @classmethod
    def none(cls):
        """The degenerate law of the no-reaction baseline (duration 0)."""
        return cls(ScalarLaw.point(0.0), ScalarLaw.point(0.0), ScalarLaw.point(0.0))

    @property
    def is_zero(self) -> bool:
        """True when every reaction has zero duration."""
        return self.t_law.support()[1] == 0.0

    def validate_against(self, params: ModelParams):
        lo, _ = self.sigma_shift_law.support()
        if params.sigma + lo <= 0:
            raise ValueError(
                f"shifted volatility {params.sigma + lo} <= 0 on the support of "
                "sigma_shift_law")


@dataclass(frozen=True)
class ValueCoeffs:
    """Coefficients of the candidate value function on the band.

    ``a_coef`` scales the decaying power ``x**gamma2`` and ``b_coef`` the
    growing power ``x**gamma1`` (gamma1 > 0 > gamma2); this pairing matches
    the (A, B) reported in solved policies.  (c2, c1, c0) is the particular
    quadratic tied to the model parameters used to build the coefficients.
    """

    a_coef: float
    b_coef: float
    gamma1: float
    gamma2: float
    c2: float
    c1: float
    c0: float

    def __post_init__(self):
        if not (self.gamma1 > 0 > self.gamma2):
            raise ValueError(
                f"need gamma1 > 0 > gamma2, got {self.gamma1}, {self.gamma2}")


def gamma_roots(params: ModelParams):
    """Roots of 0.5 sigma^2 g (g - 1) + mu g - r = 0, returned (positive, negative).

    The positive/negative split always holds because the constant term is
    -r < 0.  Uses the sign-safe quadratic formula so neither root loses
    precision to cancellation.
    """
    half_s2 = 0.5 * params.sigma**2
    b = params.mu - half_s2
    c = -params.r
    disc = math.sqrt(b * b - 4.0 * half_s2 * c)
    q = -0.5 * (b + math.copysign(disc, b)) if b != 0 else 0.5 * disc
    r1 = q / half_s2
    r2 = c / q
    return (r1, r2) if r1 > r2 else (r2, r1)


def particular_coeffs(params: ModelParams):
    """(c2, c1, c0) of the quadratic killing the running cost under the generator."""
    den2 = params.r - params.sigma**2 - 2 * params.mu
    den1 = params.r - params.mu
    if abs(den1) < EPS_DEN or abs(den2) < EPS_DEN:
        raise DegenerateDenominator(
            f"resonant denominators: r - mu = {den1:.3e}, "
            f"r - sigma^2 - 2 mu = {den2:.3e}")
    return 1.0 / den2, -2.0 * params.rho / den1, params.rho**2 / params.r


def build_coeffs(params: ModelParams, a_coef: float, b_coef: float) -> ValueCoeffs:
    """Assemble ValueCoeffs for given homogeneous weights."""
    g1, g2 = gamma_roots(params)
    c2, c1, c0 = particular_coeffs(params)
    return ValueCoeffs(a_coef=a_coef, b_coef=b_coef, gamma1=g1, gamma2=g2,
                       c2=c2, c1=c1, c0=c0)


def phi(coeffs: ValueCoeffs, x, order: int = 0):
    """Candidate value function on the band, or its first/second derivative.

    ``x`` may be a positive scalar or array.  ``order`` selects the
    derivative (0, 1, or 2).
    """
    A, B = coeffs.a_coef, coeffs.b_coef
    g1, g2 = coeffs.gamma1, coeffs.gamma2
    x = np.asarray(x, dtype=float)
    if order == 0:
        out = A * x**g2 + B * x**g1 + coeffs.c2 * x * x + coeffs.c1 * x + coeffs.c0
    elif order == 1:
        out = A * g2 * x**(g2 - 1) + B * g1 * x**(g1 - 1) + 2 * coeffs.c2 * x + coeffs.c1
    elif order == 2:
        out = (A * g2 * (g2 - 1) * x**(g2 - 2)
               + B * g1 * (g1 - 1) * x**(g1 - 2) + 2 * coeffs.c2)
    else:
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    return out if out.ndim else float(out)


def generator_apply(coeffs: ValueCoeffs, params: ModelParams, x):
    """Discounted generator of the base regime applied to phi at x."""
    x = np.asarray(x, dtype=float)
    return (0.5 * params.sigma**2 * x * x * phi(coeffs, x, 2)
            + params.mu * x * phi(coeffs, x, 1) - params.r * phi(coeffs, x, 0))


def exp_integral(q: float, t: float) -> float:
    """Integral of exp(q s) over [0, t], stable near q = 0.

    Equals (exp(q t) - 1) / q; the series branch avoids the 0/0 form when
    |q t| is tiny.
    """
    qt = q * t
    if abs(qt) < 1e-6:
        return t * (1.0 + qt * (0.5 + qt * (1.0 / 6.0 + qt / 24.0)))
    return math.expm1(qt) / q


def ktilde_fixed(x: float, t: float, sigma2: float, mu2: float,
                 params: ModelParams) -> float:
    """Expected discounted quadratic deviation over a reaction window.

    The reaction-regime process starts at ``x`` and runs for a fixed time
    ``t`` with coefficients (mu2, sigma2); the result is

        int_0^t e^{-r s} E[(X(s) - rho)^2] ds
        = x^2 I(2 mu2 + sigma2^2 - r) - 2 rho x I(mu2 - r) + rho^2 I(-r)

    with I(q) = exp_integral(q, t).
    """
    if t < 0:
        raise ValueError(f"reaction duration must be >= 0, got {t}")
    r, rho = params.r, params.rho
    return (x * x * exp_integral(2 * mu2 + sigma2 * sigma2 - r, t)
            - 2 * rho * x * exp_integral(mu2 - r, t)
            + rho * rho * exp_integral(-r, t))


def ktilde_dx(x: float, t: float, sigma2: float, mu2: float,
              params: ModelParams) -> float:
    """Derivative of ``ktilde_fixed`` in the restart point x."""
    if t < 0:
        raise ValueError(f"reaction duration must be >= 0, got {t}")
    r, rho = params.r, params.rho
    return (2 * x * exp_integral(2 * mu2 + sigma2 * sigma2 - r, t)
            - 2 * rho * exp_integral(mu2 - r, t))


def _lognormal_moments(alpha: float, t: float, sigma2: float, mu2: float):
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    var = sigma2 * sigma2 * t
    if var == 0.0:
        raise DegenerateDistribution(
            "t * sigma2^2 == 0: the transition is a point mass at "
            "alpha * exp(mu2 t); branch to the deterministic case")
    mean = math.log(alpha) + (mu2 - 0.5 * sigma2 * sigma2) * t
    return mean, math.sqrt(var)


def lognormal_density(x, alpha: float, t: float, sigma2: float, mu2: float):
    """Transition density of the reaction-regime process after time t.

    log X(t) ~ N(log alpha + (mu2 - sigma2^2/2) t, sigma2^2 t).  Raises
    DegenerateDistribution when the law collapses to a point mass.
    """
    m, sd = _lognormal_moments(alpha, t, sigma2, mu2)
    x = np.asarray(x, dtype=float)
    z = (np.log(x) - m) / sd
    out = np.exp(-0.5 * z * z) / (x * sd * math.sqrt(2.0 * math.pi))
    return out if out.ndim else float(out)


def lognormal_cdf(x, alpha: float, t: float, sigma2: float, mu2: float):
    """Distribution function matching ``lognormal_density``."""
    m, sd = _lognormal_moments(alpha, t, sigma2, mu2)
    x = np.asarray(x, dtype=float)
    out = ndtr((np.log(x) - m) / sd)
    return out if out.ndim else float(out)
