"""Small argument checkers shared by the public functions."""

import numbers

import numpy as np

from .exceptions import (
    InvalidDimensionError,
    InvalidOrderError,
    InvalidParameterError,
    InvalidTruncationError,
    OutOfDomainError,
)


def _is_int(value):
    return isinstance(value, numbers.Integral) and not isinstance(value, bool)


def check_dimension(n, name="n"):
    if not _is_int(n) or n < 1:
        raise InvalidDimensionError(f"{name} must be a positive integer, got {n!r}")
    return int(n)


def check_truncation(delta_n, n, name="delta_n", allow_zero=True):
    if not _is_int(delta_n) or delta_n < (0 if allow_zero else 1):
        raise InvalidTruncationError(
            f"{name} must be a {'non-negative' if allow_zero else 'positive'} integer, got {delta_n!r}"
        )
    if delta_n >= n:
        raise InvalidTruncationError(f"{name}={delta_n} must be smaller than the dimension {n}")
    return int(delta_n)


def check_count(value, name, minimum=0, error=InvalidParameterError):
    if not _is_int(value) or value < minimum:
        raise error(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_tau(tau, name="tau"):
    try:
        tau = float(tau)
    except (TypeError, ValueError):
        raise OutOfDomainError(f"{name} must be a real number, got {tau!r}") from None
    if not np.isfinite(tau) or tau <= 0:
        raise OutOfDomainError(f"{name} must be positive and finite, got {tau!r}")
    return tau


def check_order(p, p_max=None):
    if not _is_int(p) or p < 1 or (p_max is not None and p > p_max):
        upper = "" if p_max is None else f" and <= {p_max}"
        raise InvalidOrderError(f"order p must be an integer >= 1{upper}, got {p!r}")
    return int(p)


def check_alpha(alpha):
    try:
        alpha = float(alpha)
    except (TypeError, ValueError):
        raise InvalidParameterError(f"alpha must be a real number, got {alpha!r}") from None
    if not np.isfinite(alpha) or alpha <= 0 or alpha == 1:
        raise InvalidParameterError(
            f"alpha must be positive and different from 1, got {alpha!r} "
            "(use the von Neumann entropy for alpha -> 1)"
        )
    return alpha
