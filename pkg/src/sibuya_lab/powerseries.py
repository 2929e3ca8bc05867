"""Truncated power-series arithmetic on plain float coefficient arrays.

All routines treat a 1-D numpy array ``c`` as the series c[0] + c[1] x + ...
truncated after ``len(c)`` terms.  Multiplication and composition of series
with nonnegative coefficients involve no cancellation, so plain float64
convolutions are fine; division is the cancellation-prone operation and uses
compensated (exact) summation per output coefficient.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DivisionInstabilityError, InversionError

__all__ = [
    "mul",
    "compose",
    "divide",
    "revert",
]


def _trim(c: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n + 1)
    m = min(len(c), n + 1)
    out[:m] = c[:m]
    return out


def mul(a, b, n: int) -> np.ndarray:
    """Product of two series, truncated at order n."""
    a = _trim(np.asarray(a, float), n)
    b = _trim(np.asarray(b, float), n)
    return np.convolve(a, b)[: n + 1]


def compose(outer, inner, n: int) -> np.ndarray:
    """Coefficients of outer(inner(x)) through order n.

    Exact (up to roundoff) only when inner[0] == 0: then the composition is
    triangular and the first n+1 output coefficients depend on no discarded
    input coefficient.
    """
    outer = _trim(np.asarray(outer, float), n)
    inner = _trim(np.asarray(inner, float), n)
    if abs(inner[0]) > 1e-13:
        raise ValueError(
            "series composition requires inner constant term 0, got "
            f"{inner[0]!r}"
        )
    inner = inner.copy()
    inner[0] = 0.0
    # Horner: r = outer[n]; r = r*inner + outer[k]
    res = np.zeros(n + 1)
    res[0] = outer[n]
    for k in range(n - 1, -1, -1):
        res = np.convolve(res, inner)[: n + 1]
        res[0] += outer[k]
    return res


def divide(num, den, n: int) -> np.ndarray:
    """Coefficients of num(x)/den(x) through order n.

    Shared leading zeros cancel; beyond that the denominator's leading
    coefficient must be bounded away from zero.  Each output coefficient is
    accumulated with math.fsum to keep the alternating sums exact.
    """
    num = np.asarray(num, float)
    den = np.asarray(den, float)
    nz_den = np.flatnonzero(np.abs(den) > 0)
    if len(nz_den) == 0:
        raise DivisionInstabilityError("division by an identically zero series")
    shift = nz_den[0]
    if shift:
        if np.any(np.abs(num[:shift]) > 1e-13 * max(1.0, np.abs(num).max())):
            raise DivisionInstabilityError(
                "numerator has fewer leading zeros than denominator"
            )
        num = num[shift:]
        den = den[shift:]
    if abs(den[0]) < 1e-12:
        raise DivisionInstabilityError(
            f"leading denominator coefficient {den[0]!r} below 1e-12"
        )
    num = _trim(num, n)
    den = _trim(den, n)
    q = np.zeros(n + 1)
    d0 = den[0]
    for k in range(n + 1):
        terms = [num[k]]
        m = min(k, n)
        terms.extend(-den[i] * q[k - i] for i in range(1, m + 1))
        q[k] = math.fsum(terms) / d0
    return q


def revert(q, n: int) -> np.ndarray:
    """Series reversion: w(u) with q(w(u)) = u through order n.

    Requires q[0] = 0 and q[1] != 0.  Uses Newton iteration with order
    doubling on truncated series, which is stabler near criticality than
    closed-form Lagrange coefficients.
    """
    q = _trim(np.asarray(q, float), n)
    if abs(q[0]) > 1e-13:
        raise InversionError("reversion requires constant term 0")
    if abs(q[1]) < 1e-13:
        raise InversionError("reversion requires a nonzero linear coefficient")
    dq = np.arange(1, n + 1) * q[1:]  # derivative series
    # start from the exact order-1 inverse and double the trusted order
    w = np.zeros(n + 1)
    w[1] = 1.0 / q[1]
    order = 1
    while order < n:
        order = min(2 * order, n)
        qw = compose(q, w, order)
        qw[1] -= 1.0  # q(w(u)) - u
        dqw = compose(_trim(dq, order), w, order)
        corr = divide(qw, dqw, order)
        w = _trim(w, order) - corr
        w[0] = 0.0
    return _trim(w, n)
