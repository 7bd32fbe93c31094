"""Incomplete gamma function for complex order and argument.

Two kernels do the work, both vectorized over broadcast inputs:

* ``_cf_scaled(a, x)``     = x**-a e**x Gamma(a, x), Legendre continued fraction
  evaluated with the modified Lentz algorithm;
* ``_series_scaled(a, x)`` = x**-a e**x gamma(a, x), the power series of the
  lower function.

Keeping the factor x**a e**-x outside lets callers assemble products such as
e**(p tau) Gamma(p, p tau) in log space without overflow.
"""

import numpy as np
from scipy.special import exp1, loggamma, zeta

from .exceptions import NumericalFailureError, OutOfDomainError

EULER_GAMMA = 0.57721566490153286061

_EPS = 2.0 ** -52
_TINY = 1e-300
_MAX_ITER = 100_000
_SMALL_ORDER = 0.5

# Taylor coefficients of ln Gamma(1 + a) = -gamma a + sum_k (-1)^k zeta(k) a^k / k.
_LGAMMA1P_COEFFS = np.array(
    [0.0, -EULER_GAMMA] + [(-1) ** k * zeta(k) / k for k in range(2, 60)]
)


def _cf_scaled(a, x, max_iter=_MAX_ITER):
    shape = np.shape(x)
    a = np.ravel(a).astype(complex)
    x = np.ravel(x).astype(complex)
    b = x + 1 - a
    c = np.full(b.shape, 1 / _TINY, dtype=complex)
    d = 1 / np.where(b == 0, _TINY, b)
    h = d.copy()
    active = np.ones(b.shape, dtype=bool)
    for i in range(1, max_iter):
        idx = np.flatnonzero(active)
        an = -i * (i - a.flat[idx])
        bi = b.flat[idx] + 2 * i
        di = an * d.flat[idx] + bi
        di = np.where(di == 0, _TINY, di)
        ci = bi + an / c.flat[idx]
        ci = np.where(ci == 0, _TINY, ci)
        di = 1 / di
        delta = ci * di
        d.flat[idx] = di
        c.flat[idx] = ci
        h.flat[idx] *= delta
        done = np.abs(delta - 1) <= _EPS
        active.flat[idx[done]] = False
        if not active.any():
            return h.reshape(shape)
    raise NumericalFailureError(
        "incomplete gamma continued fraction did not converge",
        {"iterations": max_iter, "unconverged": int(active.sum())},
    )


def _series_scaled(a, x, max_iter=_MAX_ITER):
    shape = np.shape(x)
    a = np.ravel(a).astype(complex)
    x = np.ravel(x).astype(complex)
    term = 1 / a
    total = term.copy()
    active = np.ones(a.shape, dtype=bool)
    for i in range(1, max_iter):
        idx = np.flatnonzero(active)
        t = term.flat[idx] * x.flat[idx] / (a.flat[idx] + i)
        s = total.flat[idx] + t
        term.flat[idx] = t
        total.flat[idx] = s
        done = np.abs(t) <= np.abs(s) * _EPS
        active.flat[idx[done]] = False
        if not active.any():
            return total.reshape(shape)
    raise NumericalFailureError(
        "incomplete gamma series did not converge",
        {"iterations": max_iter, "unconverged": int(active.sum())},
    )


def _expm1_ratio(z):
    """expm1(z)/z, equal to 1 at z = 0."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-5
    safe = np.where(small, 1, z)
    return np.where(small, 1 + z / 2 + z * z / 6, np.expm1(safe) / safe)


def _small_order_upper(a, x):
    """Gamma(a, x) for |a| < 1/2 and moderate |x|, free of the 1/a cancellation.

    Gamma(a, x) = [Gamma(1+a) - 1]/a - (x**a - 1)/a - x**a sum_{n>=1} (-x)^n / (n! (a+n)).
    """
    # expm1(z)/a = (z/a) expm1(z)/z with z/a known in closed form; no division by a
    lg_over_a = np.polynomial.polynomial.polyval(a, _LGAMMA1P_COEFFS[1:])
    g1 = lg_over_a * _expm1_ratio(a * lg_over_a)
    lx = np.log(x)
    xa1 = lx * _expm1_ratio(a * lx)
    term = np.ones_like(x)
    total = np.zeros_like(x)
    for n in range(1, 400):
        term = term * (-x) / n
        inc = term / (a + n)
        total = total + inc
        if np.all(np.abs(inc) <= np.abs(total) * _EPS):
            break
    return g1 - xa1 - np.exp(a * lx) * total


def _use_cf(a, x):
    ax = np.abs(x)
    return (ax > 1.5) & (ax >= np.abs(a) * 0.999) | (ax > 40) & (x.real >= a.real)


def _prepare(a, x):
    a = np.asarray(a, dtype=complex)
    x = np.asarray(x, dtype=complex)
    a, x = np.broadcast_arrays(a, x)
    a = a.copy()
    x = x.copy()
    if np.any((x.real <= 0) & (x.imag == 0)) or np.any(~np.isfinite(x)):
        raise OutOfDomainError("incomplete gamma needs x off the closed negative real axis and x != 0")
    return a, x


def _log_upper_unscaled(a, x):
    """ln Gamma(a, x) (principal branch not guaranteed; only exp of it is used)."""
    out = np.empty(a.shape, dtype=complex)
    cf = _use_cf(a, x)
    if cf.any():
        out[cf] = a[cf] * np.log(x[cf]) - x[cf] + np.log(_cf_scaled(a[cf], x[cf]))
    rest = ~cf
    if rest.any():
        out[rest] = np.log(_upper_by_series(a[rest], x[rest]))
    return out


def _upper_by_series(a, x):
    """Gamma(a, x) where the continued fraction is not efficient."""
    out = np.empty(a.shape, dtype=complex)
    zero = a == 0
    if zero.any():
        out[zero] = exp1(x[zero])
    near = ~zero & (a.real < _SMALL_ORDER)
    if near.any():
        out[near] = _upper_small_or_negative(a[near], x[near])
    regular = ~zero & ~near
    if regular.any():
        ar, xr = a[regular], x[regular]
        lower = np.exp(ar * np.log(xr) - xr) * _series_scaled(ar, xr)
        out[regular] = np.exp(loggamma(ar)) - lower
    return out


def _upper_small_or_negative(a, x):
    # Shift to b = a + k with Re b in [-1/2, 1/2), then recur downwards:
    # Gamma(b - 1, x) = (Gamma(b, x) - x**(b-1) e**-x) / (b - 1).
    k = np.maximum(np.round(-a.real), 0).astype(int)
    b = a + k
    val = np.empty(a.shape, dtype=complex)
    small = np.abs(b) < _SMALL_ORDER
    if small.any():
        val[small] = _small_order_upper(b[small], x[small])
    big = ~small
    if big.any():
        bb, xb = b[big], x[big]
        val[big] = np.exp(loggamma(bb)) - np.exp(bb * np.log(xb) - xb) * _series_scaled(bb, xb)
    lx = np.log(x)
    for step in range(int(k.max()) if k.size else 0):
        m = k > step
        bm = b[m] - 1
        val[m] = (val[m] - np.exp(bm * lx[m] - x[m])) / bm
        b[m] = bm
    return val


def gamma_upper(a, x, scaled=False):
    """Upper incomplete gamma Gamma(a, x) = int_x^inf t^(a-1) e^-t dt.

    ``a`` may be any complex number; ``x`` must avoid the closed negative real
    axis (positive reals in ordinary use). With ``scaled=True`` returns
    e**x Gamma(a, x), which stays finite when Gamma(a, x) alone would
    underflow. ``Gamma(0, x)`` is the exponential integral E_1(x).

    Returns a float for real inputs with a real result and a complex value
    otherwise; arrays broadcast.
    """
    real_input = np.isrealobj(a) and np.isrealobj(x)
    a_arr, x_arr = _prepare(a, x)
    if real_input and np.any(x_arr.real <= 0):
        raise OutOfDomainError("gamma_upper needs x > 0 for real arguments")
    logv = _log_upper_unscaled(a_arr, x_arr)
    if scaled:
        logv = logv + x_arr
    val = np.exp(logv)
    if real_input:
        val = val.real
    return val.item() if val.ndim == 0 else val


def gamma_upper_regularized(a, x):
    """Q(a, x) = Gamma(a, x) / Gamma(a) for Re a > 0.

    Uses the continued fraction where Q is small and 1 - P (series) where it
    is close to one, so neither branch subtracts nearly equal numbers.
    """
    real_input = np.isrealobj(a) and np.isrealobj(x)
    a_arr, x_arr = _prepare(a, x)
    if np.any(a_arr.real <= 0):
        raise OutOfDomainError("regularized incomplete gamma needs Re a > 0")
    prefactor_log = a_arr * np.log(x_arr) - x_arr - loggamma(a_arr)
    out = np.empty(a_arr.shape, dtype=complex)
    cf = _use_cf(a_arr, x_arr)
    if cf.any():
        out[cf] = np.exp(prefactor_log[cf]) * _cf_scaled(a_arr[cf], x_arr[cf])
    rest = ~cf
    if rest.any():
        out[rest] = 1 - np.exp(prefactor_log[rest]) * _series_scaled(a_arr[rest], x_arr[rest])
    if real_input:
        out = out.real
    return out.item() if out.ndim == 0 else out


def gamma_lower_regularized(a, x):
    """P(a, x) = 1 - Q(a, x), accurate where P is small (series branch)."""
    real_input = np.isrealobj(a) and np.isrealobj(x)
    a_arr, x_arr = _prepare(a, x)
    if np.any(a_arr.real <= 0):
        raise OutOfDomainError("regularized incomplete gamma needs Re a > 0")
    prefactor_log = a_arr * np.log(x_arr) - x_arr - loggamma(a_arr)
    out = np.empty(a_arr.shape, dtype=complex)
    cf = _use_cf(a_arr, x_arr)
    if cf.any():
        out[cf] = 1 - np.exp(prefactor_log[cf]) * _cf_scaled(a_arr[cf], x_arr[cf])
    rest = ~cf
    if rest.any():
        out[rest] = np.exp(prefactor_log[rest]) * _series_scaled(a_arr[rest], x_arr[rest])
    if real_input:
        out = out.real
    return out.item() if out.ndim == 0 else out


def upper_scaled_cf(a, x):
    """x**-a e**x Gamma(a, x); converges for all x off the negative axis."""
    a_arr, x_arr = _prepare(a, x)
    return _cf_scaled(a_arr, x_arr)


def lower_scaled_series(a, x):
    """x**-a e**x gamma(a, x) for a not a non-positive integer."""
    a_arr, x_arr = _prepare(a, x)
    return _series_scaled(a_arr, x_arr)
