"""Closed-form results in the double-scaling limit L, N -> oo at fixed tau.

The limit moment of order p is

    S_p(tau) = exp(-p tau) G_p(tau) / Gamma(p)

with G_p the Erlang delay function. For integer p, G_p is a polynomial with
integer coefficients. For other p it is continued through the
incomplete gamma function:

    G_p(tau) = e^(p tau) (1 - tau) (p - 1) Gamma(p - 1, p tau) + (p tau)^(p - 1)
             = (1 - tau) e^x Gamma(p, x) + tau x^(p - 1),      x = p tau,

where the second line follows from Gamma(a + 1, x) = a Gamma(a, x) + x^a e^-x
and avoids the pole of Gamma(p - 1, .) at p = 1.
"""

from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import NamedTuple

import numpy as np
from scipy.special import loggamma

from ._validation import check_alpha, check_order, check_tau
from .exceptions import OutOfDomainError
from .special import EULER_GAMMA, gamma_lower_regularized, gamma_upper, gamma_upper_regularized

CRITICAL_TOLERANCE = 1e-12


@dataclass(frozen=True)
class ScalingPoint:
    tau: float

    def __post_init__(self):
        object.__setattr__(self, "tau", check_tau(self.tau))

    @property
    def regime(self):
        if abs(self.tau - 1) <= CRITICAL_TOLERANCE:
            return "critical"
        return "subcritical" if self.tau < 1 else "supercritical"

    @property
    def lambda_min(self):
        return lambda_min(self.tau)


def _tau(tau):
    return tau.tau if isinstance(tau, ScalingPoint) else check_tau(tau)


def _is_integer_order(p):
    if isinstance(p, (bool, np.bool_)):
        return False
    if isinstance(p, (int, np.integer)):
        return True
    return False


def lambda_min(tau):
    """Lower edge tau - 1 - ln tau of the continuous part of the lambda density."""
    tau = _tau(tau)
    return float(tau - 1 - np.log(tau))


def erlang_coefficients(p):
    """Integer coefficients c_0..c_{p-1} with G_p(tau) = sum_k c_k tau^k."""
    p = check_order(p)
    fact = factorial(p - 1)
    coeffs = [fact]
    for k in range(1, p):
        # (1 - tau)(p-1)! sum_i (p tau)^i / i!  contributes p^k/k! - p^(k-1)/(k-1)!.
        coeffs.append(fact * p ** k // factorial(k) - fact * p ** (k - 1) // factorial(k - 1))
    # The tau^p terms, -(p-1)! p^(p-1)/(p-1)! + p^(p-1), cancel exactly.
    return coeffs


def erlang_polynomial_exact(p, tau):
    """G_p(tau) in exact rational arithmetic, for integer p and rational tau."""
    tau = Fraction(tau)
    return sum(Fraction(c) * tau ** k for k, c in enumerate(erlang_coefficients(p)))


def _erlang_integer(p, tau):
    fact = factorial(p - 1)
    terms = [(p * tau) ** i / factorial(i) for i in range(p)]
    return (1 - tau) * fact * float(np.sum(terms)) + tau ** p * float(p) ** (p - 1)


def _erlang_continued(p, tau):
    p = np.asarray(p, dtype=complex if np.iscomplexobj(p) else float)
    x = p * tau
    first = (1 - tau) * gamma_upper(p, x, scaled=True) if tau != 1 else 0.0
    return first + tau * np.exp((p - 1) * np.log(x))


def erlang_G(p, tau):
    """Erlang delay function G_p(tau).

    Integer ``p`` uses the finite sum; any other real or complex ``p`` with
    positive real part uses the incomplete-gamma continuation. Large p
    overflows; use :func:`moment_limit` which works in log space.
    """
    t = _tau(tau)
    if _is_integer_order(p):
        return _erlang_integer(check_order(p), t)
    val = _erlang_continued(_check_order_value(p), t)
    return _squeeze(val)


def erlang_G_continued(p, tau):
    """G_p(tau) through the incomplete gamma route, also for integer p."""
    return _squeeze(_erlang_continued(_check_order_value(p), _tau(tau)))


def _check_order_value(p):
    arr = np.asarray(p)
    if np.any(np.real(arr) <= 0) or not np.all(np.isfinite(arr)):
        raise OutOfDomainError("order p must have positive real part")
    return arr


def _squeeze(val):
    val = np.asarray(val)
    if np.iscomplexobj(val) and np.all(val.imag == 0):
        val = val.real
    return val.item() if val.ndim == 0 else val


def log_moment_limit(p, tau):
    """ln S_p(tau), finite for large p where S_p itself would underflow."""
    t = _tau(tau)
    p = _check_order_value(p)
    return np.log(_moment_limit(p, t))


def _moment_limit(p, tau):
    p = np.asarray(p, dtype=complex if np.iscomplexobj(p) else float)
    x = p * tau
    tail = tau * np.exp((p - 1) * np.log(x) - x - loggamma(p))
    if tau == 1:
        return tail
    if tau < 1:
        # atom plus continuum; the continuum is formed on its own so it keeps
        # full relative accuracy (and monotonicity in p) once it is tiny
        return (1 - tau) + (tail - (1 - tau) * gamma_lower_regularized(p, x))
    return (1 - tau) * gamma_upper_regularized(p, x) + tail


def moment_limit(p, tau):
    """Limit moment S_p(tau) = e^(-p tau) G_p(tau) / Gamma(p); arrays broadcast."""
    t = _tau(tau)
    p = _check_order_value(p)
    return _squeeze(_moment_limit(p, t))


class Asymptote(NamedTuple):
    value: float
    regime: str


def moment_asymptotic(p, tau):
    """Leading large-p behaviour of the limit moment.

    tau < 1 tends to the atom 1 - tau, tau = 1 to (2 pi p)^-1/2, and tau > 1 to
    tau e^(-p lambda_min) / ((tau - 1)^2 sqrt(2 pi) p^(3/2)); the leading
    terms of the two pieces of S_p cancel there, so the relative error is O(1/p).
    """
    point = ScalingPoint(_tau(tau))
    p = float(p)
    if p < 1:
        raise OutOfDomainError("asymptotic form needs p >= 1")
    if point.regime == "subcritical":
        return Asymptote(1 - point.tau, "subcritical")
    if point.regime == "critical":
        return Asymptote((2 * np.pi * p) ** -0.5, "critical")
    t = point.tau
    value = t * np.exp(-point.lambda_min * p) / ((t - 1) ** 2 * np.sqrt(2 * np.pi) * p ** 1.5)
    return Asymptote(value, "supercritical")


def renyi_offset(alpha, tau):
    """Limit of the Renyi entropy minus ln N: ln[G_alpha / Gamma(alpha)] / (1 - alpha)."""
    alpha = check_alpha(alpha)
    t = _tau(tau)
    # G_a / Gamma(a) = e^(a tau) S_a.
    return float((alpha * t + np.log(_moment_limit(np.float64(alpha), t))) / (1 - alpha))


def vn_entropy_offset(tau):
    """Limit of the von Neumann entropy minus ln N.

    -ln tau + e^tau (tau - 1) Gamma(0, tau) - gamma_Euler; tends to -tau for
    small tau and to 1 - ln tau - gamma_Euler for large tau.
    """
    t = _tau(tau)
    return float(-np.log(t) + (t - 1) * gamma_upper(0.0, t, scaled=True) - EULER_GAMMA)


def kaczmarz_moment(p):
    """(p/e)^p / p!, the tau = 1 limit moment written for integer or real p."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        raise OutOfDomainError("p must be positive")
    return _squeeze(np.exp(p * np.log(p) - p - loggamma(p + 1).real))
