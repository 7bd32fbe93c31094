"""Singular-value density from the analytically continued limit moments.

With lambda = -ln sigma^2 the limit moments are a Laplace transform,
S_p = int e^(-p lambda) D(lambda) d lambda, plus an atom of mass 1 - tau at
lambda = 0 when tau < 1. The density is recovered on a Bromwich line
Re p = c. The Fourier-type sum along that line is accelerated with the
de Hoog-Knight-Stokes quotient-difference continued fraction, which handles
the slow |Im p|^(-1/2) decay at tau = 1 that defeats plain truncation.

Because S_p carries the factor e^(-p lambda_min), the transform inverted
by default is F(p) = (S_p - atom) e^(p lambda_min), evaluated at
t = lambda - lambda_min. Written with K(p) = p^p e^-p / Gamma(p), it is

    tau = 1 :  F = K(p) / p
    tau > 1 :  F = K(p) [1/p + (1 - tau) x^-p e^x Gamma(p, x)]
    tau < 1 :  F = K(p) [1/p - (1 - tau) x^-p e^x gamma(p, x)],   x = p tau

so no exponentially large factors appear anywhere on the contour.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import loggamma

from ._validation import check_count, check_tau
from .exceptions import InvalidParameterError, InversionFailureError, OutOfDomainError
from .limits import ScalingPoint, lambda_min, moment_limit
from .special import lower_scaled_series, upper_scaled_cf

DEFAULT_ORDER = 20
CONVERGENCE_TOL = 1e-3
# Exponent used to place the Bromwich line: c T = -ln(tol) / 2.
_DAMPING_TOL = 1e-10
# tau = 1: the density diverges like lambda^-1/2, so grids start here.
CRITICAL_GRID_START = 1e-4


def _tau(tau):
    return tau.tau if isinstance(tau, ScalingPoint) else check_tau(tau)


def atom_weight(tau):
    return max(0.0, 1.0 - _tau(tau))


def continuum_transform(p, tau, shifted=True):
    """Laplace transform of the continuous part of D, optionally shifted to its edge."""
    tau = _tau(tau)
    p = np.asarray(p, dtype=complex)
    if np.any(p.real <= 0):
        raise OutOfDomainError("the continued moments are used for Re p > 0 only")
    log_k = p * np.log(p) - p - loggamma(p)
    if tau == 1:
        bracket = 1 / p
    elif tau > 1:
        bracket = 1 / p + (1 - tau) * upper_scaled_cf(p, p * tau)
    else:
        bracket = 1 / p - (1 - tau) * lower_scaled_series(p, p * tau)
    out = np.exp(log_k) * bracket
    if not shifted:
        out = out * np.exp(-p * lambda_min(tau))
    return out


def _qd_coefficients(a):
    """Continued-fraction coefficients from the quotient-difference table."""
    n = len(a) - 1
    m = n // 2
    d = np.zeros(n + 1, dtype=complex)
    d[0] = a[0]
    q = a[1:] / a[:-1]
    e = np.zeros(n, dtype=complex)
    d[1] = -q[0]
    for r in range(1, m + 1):
        e = q[1:] - q[:-1] + e[1 : len(q)]
        d[2 * r] = -e[0]
        if r < m:
            q = q[1 : len(e)] * e[1:] / e[:-1]
            d[2 * r + 1] = -q[0]
    return d


def _cf_eval(d, z):
    n = len(d) - 1
    a_prev, a_cur = np.zeros_like(z), np.full_like(z, d[0])
    b_prev, b_cur = np.ones_like(z), np.ones_like(z)
    for k in range(1, n):
        a_prev, a_cur = a_cur, a_cur + d[k] * z * a_prev
        b_prev, b_cur = b_cur, b_cur + d[k] * z * b_prev
    # Tail estimate for the last fraction (improves the final convergent).
    h = 0.5 * (1 + (d[n - 1] - d[n]) * z)
    r = -h * (1 - np.sqrt(1 + d[n] * z / h ** 2))
    return (a_cur + r * a_prev) / (b_cur + r * b_prev)


@dataclass(frozen=True)
class BromwichWindow:
    """One set of contour nodes p_k = c + i k pi / T, k = 0..2M, shared by all t in (T/10, T]."""

    half_period: float
    abscissa: float
    order: int

    def nodes(self):
        k = np.arange(2 * self.order + 1)
        return self.abscissa + 1j * np.pi * k / self.half_period

    def invert(self, transform_values, t):
        a = np.array(transform_values, dtype=complex)
        a[0] *= 0.5
        d = _qd_coefficients(a)
        z = np.exp(1j * np.pi * np.asarray(t, dtype=float) / self.half_period)
        return np.exp(self.abscissa * t) / self.half_period * _cf_eval(d, z).real


def _window_for(t, order):
    half_period = 10.0 ** np.ceil(np.log10(t))
    return BromwichWindow(half_period, -np.log(_DAMPING_TOL) / (2 * half_period), order)


def _invert_transform(transform, t, order):
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    pos = t > 0
    if not pos.any():
        return out, {}
    tp = t[pos]
    res = np.empty(tp.shape)
    exps = np.ceil(np.log10(tp)).astype(int)
    windows = {}
    for e in np.unique(exps):
        sel = exps == e
        window = _window_for(10.0 ** e, order)
        res[sel] = window.invert(transform(window.nodes()), tp[sel])
        windows[float(window.half_period)] = window
    out[pos] = res
    return out, windows


def bromwich_invert(tau, lam, shifted=True, order=DEFAULT_ORDER, check=True):
    """Continuous density D(lambda) of lambda = -ln sigma^2 in the limit.

    For tau < 1 the atom (1 - tau) delta(lambda) is subtracted before
    inversion, so only the continuous part is returned. With the default
    ``shifted=True`` the inversion runs in t = lambda - lambda_min and the
    result is exactly zero below the edge; ``shifted=False`` inverts the raw
    transform and lets the quadrature find the edge on its own.

    With ``check=True`` the inversion is repeated at a lower order and
    an :class:`InversionFailureError` is raised if the two disagree by more
    than ``CONVERGENCE_TOL``.
    """
    tau = _tau(tau)
    order = check_count(order, "order", minimum=4)
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr <= 0) or not np.all(np.isfinite(lam_arr)):
        raise OutOfDomainError("lambda must be positive and finite")
    shift = lambda_min(tau) if shifted else 0.0

    def transform(p):
        return continuum_transform(p, tau, shifted=shifted)

    t = lam_arr - shift
    if np.all(t <= 0):
        out = np.zeros(lam_arr.shape)
    else:
        out, _ = _invert_transform(transform, t, order)
        if check:
            coarse, _ = _invert_transform(transform, t, order - 4)
            err = np.abs(out - coarse)
            scale = np.maximum(np.abs(out), 1.0)
            worst = float(np.max(err / scale))
            if worst > CONVERGENCE_TOL:
                i = int(np.argmax(err / scale))
                raise InversionFailureError(
                    f"Bromwich inversion unconverged at lambda={lam_arr.flat[i]:.6g}",
                    worst,
                    {"tau": tau, "order": order},
                )
    return out.item() if out.ndim == 0 else out


def continuum_tail(tau, lam, order=DEFAULT_ORDER):
    """Continuum mass of D above ``lam``."""
    tau = _tau(tau)
    edge = lambda_min(tau)
    lam_arr = np.asarray(lam, dtype=float)
    mass = 1.0 - atom_weight(tau)
    t = lam_arr - edge

    def transform(p):
        return (mass - continuum_transform(p, tau)) / p

    out, _ = _invert_transform(transform, np.atleast_1d(t), order)
    out = np.where(np.atleast_1d(t) <= 0, mass, out)
    return out.item() if lam_arr.ndim == 0 else out


@dataclass
class DensityProfile:
    """D(lambda) on a grid plus the atom at lambda = 0.

    ``density`` is clipped at zero for display; ``signed_density`` keeps the
    raw quadrature output, which is what moment checks should use.
    """

    tau: float
    lambda_grid: np.ndarray
    density: np.ndarray
    signed_density: np.ndarray
    atom_weight: float
    metadata: dict = field(default_factory=dict)

    @property
    def lambda_min(self):
        return lambda_min(self.tau)

    def _edge_coordinates(self):
        # Integrate in u = sqrt(lambda - edge), which smooths both the
        # square-root edge and the lambda^-1/2 divergence at tau = 1.
        edge = self.lambda_min
        above = self.lambda_grid >= edge
        u = np.sqrt(self.lambda_grid[above] - edge)
        return above, u

    def laplace(self, p, signed=True):
        """atom + int e^(-p lambda) D d lambda by the trapezoid rule in u."""
        p = float(p)
        dens = self.signed_density if signed else self.density
        above, u = self._edge_coordinates()
        lam = self.lambda_grid[above]
        integrand = 2 * u * dens[above] * np.exp(-p * lam)
        total = self.atom_weight + np.trapezoid(integrand, u)
        if self.tau == 1:
            total += _critical_head(u[0] ** 2, p)
        return float(total)

    def mass(self):
        """Total probability: atom, grid integral and the tail beyond the grid."""
        return self.laplace(0.0) + self.tail_mass()

    def tail_mass(self):
        """Continuum mass above the last grid point.

        The density decays only like tau / lambda^2 with a slow logarithmic
        correction, so the tail is taken from the inverse transform of the
        complementary distribution function, (m - F(p)) / p.
        """
        return float(continuum_tail(self.tau, self.lambda_grid[-1]))

    def to_dict(self):
        return {
            "tau": self.tau,
            "lambda_min": self.lambda_min,
            "atom_weight": self.atom_weight,
            "lambda": self.lambda_grid.tolist(),
            "density": self.density.tolist(),
            "metadata": self.metadata,
        }


def _critical_head(eps, p):
    """Mass of e^(-p lambda) D on [0, eps] at tau = 1 using the chi-square form."""
    if eps <= 0:
        return 0.0
    return float(stats.gamma.cdf(eps * (1 + 2 * np.pi * p), a=0.5, scale=2 * np.pi) / np.sqrt(1 + 2 * np.pi * p))


def profile_grid(tau, lambda_max, points):
    """Grid clustered quadratically at the edge, with a few points below it."""
    tau = _tau(tau)
    edge = lambda_min(tau)
    points = check_count(points, "points", minimum=16)
    if not lambda_max > edge:
        raise InvalidParameterError(f"lambda_max={lambda_max} must exceed lambda_min={edge:.6g}")
    if tau == 1:
        s = np.linspace(np.sqrt(CRITICAL_GRID_START), np.sqrt(lambda_max), points)
        return s ** 2
    below = max(2, points // 20) if edge > 0 else 0
    margin = min(edge, 0.1 * (lambda_max - edge))
    lower = np.linspace(max(0.0, edge - margin), edge, below + 1)[:-1] if below else np.empty(0)
    s = np.linspace(0.0, np.sqrt(lambda_max - edge), points - below)
    upper = edge + s ** 2
    grid = np.concatenate([lower, upper])
    return grid[grid > 0] if tau > 1 or edge > 0 else grid


def density_profile(tau, lambda_max=10.0, points=400, order=DEFAULT_ORDER, adaptive=True):
    """Reconstruct D on a grid and record the contour parameters used.

    With ``adaptive`` the order is raised until the profile reproduces the
    limit moments p = 1, 2, 3 to 1e-3 (it normally passes at the first try).
    """
    point = ScalingPoint(_tau(tau))
    grid = profile_grid(point.tau, lambda_max, points)
    current = check_count(order, "order", minimum=8)
    while True:
        signed = np.zeros_like(grid)
        pos = grid > point.lambda_min if point.tau != 1 else grid > 0
        signed[pos] = bromwich_invert(point.tau, grid[pos], order=current)
        profile = DensityProfile(
            tau=point.tau,
            lambda_grid=grid,
            density=np.clip(signed, 0.0, None),
            signed_density=signed,
            atom_weight=atom_weight(point.tau),
        )
        errors = [abs(profile.laplace(p) - moment_limit(p, point.tau)) for p in (1, 2, 3)]
        if not adaptive or max(errors) < 1e-3 or current >= 40:
            break
        current += 8
    t = grid[pos] - (point.lambda_min if point.tau != 1 else 0.0)
    windows = sorted({float(10.0 ** np.ceil(np.log10(v))) for v in t[t > 0]})
    profile.metadata = {
        "method": "bromwich line + de Hoog quotient-difference acceleration",
        "order": current,
        "nodes_per_window": 2 * current + 1,
        "windows": [
            {"half_period": w, "abscissa": float(-np.log(_DAMPING_TOL) / (2 * w))} for w in windows
        ],
        "shifted_by_lambda_min": True,
        "roundtrip_error_p123": [float(e) for e in errors],
    }
    if max(errors) >= 1e-3:
        raise InversionFailureError("density profile fails the moment roundtrip", max(errors), profile.metadata)
    return profile


def estimate_support_edge(tau, order=40, window=(0.005, 0.03), points=12):
    """Locate the lower edge of the continuum without being told where it is.

    Inverts the unshifted transform just above the nominal edge region and
    extrapolates D^2, which is smooth and vanishes linearly at a square-root
    edge, back to zero with a quadratic fit.
    """
    tau = _tau(tau)
    if tau == 1:
        raise OutOfDomainError("at tau = 1 the density diverges at lambda = 0; there is no square-root edge")
    guess = lambda_min(tau)
    lam = guess + np.linspace(window[0], window[1], points)
    d2 = bromwich_invert(tau, lam, shifted=False, order=order, check=False) ** 2
    roots = np.roots(np.polyfit(lam, d2, 2))
    roots = roots[np.isreal(roots)].real
    if roots.size == 0:
        raise InversionFailureError("no real edge found", float("inf"), {"tau": tau})
    return float(roots[np.argmin(np.abs(roots - lam[0]))])


def chisq_moment(p):
    """(1 + 2 pi p)^(-1/2), the moments of sigma^2 = exp(-pi Y), Y ~ chi^2(1)."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise OutOfDomainError("p must be non-negative")
    out = (1 + 2 * np.pi * p) ** -0.5
    return out.item() if out.ndim == 0 else out


def chisq_density(lam):
    """Density of lambda = pi Y with Y ~ chi^2(1)."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise OutOfDomainError("lambda must be positive")
    out = stats.chi2.pdf(lam / np.pi, df=1) / np.pi
    return out.item() if out.ndim == 0 else out
