"""Accurate summation of one-step recurrence series.

A sequence with ratio t[n+1]/t[n] = P(n) / ((n+1) Q(n)), P and Q real
polynomials, is a hypergeometric-type term sequence.  Its sum over n >= floor
is needed to normalize recurrence-built pmf tables to ~1e-12 relative error,
including the slowly-converging power-law case where the term ratio tends
to 1 (tail ~ n^(-1-gamma)).

Strategy: sum the first N terms directly, then complete the tail with
Euler-Maclaurin using the exact gamma-product closed form of the terms.
Ratios of loggamma values cancel catastrophically for huge arguments, so the
signed loggamma sum switches to a Stirling-difference form beyond 1e6.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad
from scipy.special import digamma, gammaln, polygamma

from .errors import ConvergenceError, DivergenceError

__all__ = ["RecurrenceSum", "sum_rational_recurrence", "sum_ratio_sequence"]

# Bernoulli numbers B_2, B_4, ... B_10 for the Stirling series
_BERN = (1.0 / 6, -1.0 / 30, 1.0 / 42, -1.0 / 30, 5.0 / 66)

_DIRECT_N = 8192


class RecurrenceSum:
    """Prefix terms plus an accurate total for a recurrence series."""

    def __init__(self, terms: np.ndarray, floor: int, total: float,
                 tail_mass: float, tail_exponent: float | None):
        self.terms = terms          # t[floor .. floor+len-1], t[floor] = 1
        self.floor = floor
        self.total = total          # sum over all n >= floor
        self.tail_mass = tail_mass  # total minus sum of returned terms
        self.tail_exponent = tail_exponent

    def normalized(self) -> np.ndarray:
        return self.terms / self.total


def signed_lgamma_sum(x, cs, sigmas):
    """sum_i sigma_i * lgamma(x + c_i) for sum(sigma_i) == 0, stable for
    arbitrarily large x (Stirling-difference form beyond 1e6)."""
    x = np.atleast_1d(np.asarray(x, float))
    out = np.zeros_like(x)
    small = x < 1e6
    if small.any():
        xs = x[small]
        acc = np.zeros_like(xs)
        for c, s in zip(cs, sigmas):
            acc += s * gammaln(xs + c)
        out[small] = acc
    if (~small).any():
        xb = x[~small]
        d = math.fsum(s * c for c, s in zip(cs, sigmas))
        acc = d * (np.log(xb) - 1.0)
        for c, s in zip(cs, sigmas):
            acc += s * (xb + c - 0.5) * np.log1p(c / xb)
        with np.errstate(over="ignore"):
            for k, b2k in enumerate(_BERN, start=1):
                coef = b2k / (2 * k * (2 * k - 1))
                term = np.zeros_like(xb)
                for c, s in zip(cs, sigmas):
                    term += s / (xb + c) ** (2 * k - 1)
                acc += coef * term
        out[~small] = acc
    return out


def _poly_ratio_log(x, pnum, pden):
    """log of P(x)/((x+1) Q(x)) evaluated elementwise; P, Q as np.polyval
    coefficient arrays (highest degree first)."""
    num = np.polyval(pnum, x)
    den = (x + 1.0) * np.polyval(pden, x)
    return np.log(num) - np.log(den)


def _ratio_at(pnum, pden, n):
    """Term ratio P(n)/((n+1)Q(n)) with L'Hopital treatment of shared simple
    roots (both polynomials vanishing at an integer state)."""
    num = np.polyval(pnum, float(n))
    den = np.polyval(pden, float(n))
    scale_n = max(np.abs(pnum).max(), 1.0) * max(abs(n), 1.0) ** max(len(pnum) - 1, 0)
    scale_d = max(np.abs(pden).max(), 1.0) * max(abs(n), 1.0) ** max(len(pden) - 1, 0)
    for _ in range(2):
        if abs(den) > 1e-12 * scale_d or abs(num) > 1e-12 * scale_n:
            break
        pnum = np.polyder(pnum)
        pden = np.polyder(pden)
        num = np.polyval(pnum, float(n))
        den = np.polyval(pden, float(n))
    if den == 0.0:
        if num == 0.0:
            return 0.0
        raise DivergenceError(f"undefined term ratio at n={n}")
    return num / (den * (n + 1.0))


def sum_rational_recurrence(gnum, gden, floor: int, n_keep: int) -> RecurrenceSum:
    """Sum t over n >= floor for t[floor]=1, t[n+1]/t[n] = g(n)/(n+1) with
    g = gnum/gden (monomial coefficient arrays, highest degree first).

    Requires g(n) > 0 for n >= floor.  Raises DivergenceError when the series
    cannot be normalized.
    """
    gnum = np.trim_zeros(np.asarray(gnum, float), "f")
    gden = np.trim_zeros(np.asarray(gden, float), "f")
    if gnum.size == 0:
        raise DivergenceError("identically zero g; no states above the floor")
    if gden.size == 0:
        raise DivergenceError("identically zero g denominator")
    deg_n, deg_d = len(gnum) - 1, len(gden) - 1
    if deg_n > deg_d + 1:
        raise DivergenceError("term ratio grows without bound (deg g > deg+1)")
    z = 1.0
    if deg_n == deg_d + 1:
        z = gnum[0] / gden[0]
        if z > 1.0 + 1e-12:
            raise DivergenceError(f"term ratio tends to {z} > 1")
        if abs(z - 1.0) <= 1e-12:
            # Raabe: ratio = 1 - c/n + O(1/n^2) summable iff c > 1
            pn1 = gnum[1] / gnum[0] if deg_n >= 1 else 0.0
            qlead = np.polymul(gden, [1.0, 1.0])  # (n+1) * Q
            qn1 = qlead[1] / qlead[0] if len(qlead) >= 2 else 0.0
            c = qn1 - pn1
            if c <= 1.0 + 1e-12:
                raise DivergenceError(
                    f"power-law index {c - 1:.3g} <= 0; series not normalizable"
                )

    n_direct = max(_DIRECT_N, 2 * (n_keep + 2))
    n = np.arange(floor, floor + n_direct, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        logr = _poly_ratio_log(n, gnum, np.atleast_1d(gden))
    bad = ~np.isfinite(logr)
    if bad.any():
        for i in np.flatnonzero(bad):
            r = _ratio_at(gnum, gden, n[i])
            if r <= 0:
                raise DivergenceError(f"nonpositive term ratio at n={int(n[i])}")
            logr[i] = math.log(r)
    logt = np.concatenate(([0.0], np.cumsum(logr)))  # log t[floor + i]
    terms_all = np.exp(logt)
    direct = math.fsum(terms_all)

    tail_exponent = None
    use_em = deg_n == deg_d + 1 and z > 0.98
    if use_em:
        tail, tail_exponent = _em_tail(gnum, gden, floor, z,
                                       floor + n_direct, terms_all[-1],
                                       logt[-1])
        total = direct + tail - terms_all[-1]  # EM tail includes its start point
    else:
        # light tail: extend until negligible
        t = terms_all[-1]
        nn = floor + n_direct
        extra = 0.0
        while t > 1e-18 * direct:
            t *= _ratio_at(gnum, gden, nn)
            extra += t
            nn += 1
            if nn > floor + n_direct + 10 ** 6:
                raise ConvergenceError("direct summation did not converge")
        total = direct + extra

    kept = terms_all[: n_keep - floor + 1]
    tail_mass = total - math.fsum(kept)
    return RecurrenceSum(kept, floor, total, max(tail_mass, 0.0), tail_exponent)


def _em_tail(gnum, gden, floor, z, nstart, t_start, logt_start):
    """Euler-Maclaurin completion of sum_{n>=nstart} t[n] for power-law-type
    terms, anchored so the closed form agrees with the recurrence at nstart."""
    roots_n = np.roots(gnum) if len(gnum) > 1 else np.array([])
    roots_d = np.roots(np.polymul(gden, [1.0, 1.0])) if len(gden) >= 1 else np.array([])
    roots = np.concatenate([roots_n, roots_d])
    if np.abs(roots.imag).max(initial=0.0) > 1e-9:
        raise ConvergenceError("complex recurrence roots: no tail closed form")
    cs = [-float(u) for u in roots_n.real] + [-float(v) for v in roots_d.real]
    sigmas = [1.0] * len(roots_n) + [-1.0] * len(roots_d)
    if any(nstart + c <= 0 for c in cs):
        raise ConvergenceError("gamma-form tail has a pole above the floor")
    logz = math.log(z) if z < 1.0 else 0.0

    def logf_raw(x):
        x = np.asarray(x, float)
        return signed_lgamma_sum(x, cs, sigmas) + x * logz

    # anchor so the closed form agrees exactly with the recurrence at nstart
    anchor = logt_start - float(logf_raw(np.array([float(nstart)]))[0])

    def logf(x):
        return logf_raw(x) + anchor

    # f ~ z^x * x^d with d = sum sigma_i c_i; for z = 1 Raabe guarantees d < -1
    d = math.fsum(s * c for c, s in zip(cs, sigmas))
    gamma_tail = -(1.0 + d) if z >= 1.0 else None
    if z >= 1.0:
        x_cap = (1e-18 * max(-d - 1.0, 1e-3)) ** (1.0 / (d + 1.0))
        s_cap = max(math.log(max(x_cap, 10 * nstart) / nstart), 5.0)
    else:
        s_cap = min(max(-41.0 / logz, 5.0), 600.0)

    def integrand(s):
        x = nstart * math.exp(s)
        return float(np.exp(logf(x) + s)) * nstart

    with np.errstate(over="ignore"):
        tail_int, _err = quad(integrand, 0.0, s_cap, epsrel=1e-12, limit=800)

    h1 = math.fsum(s * digamma(nstart + c) for c, s in zip(cs, sigmas)) + (logz if z < 1 else 0.0)
    h2 = math.fsum(s * polygamma(1, nstart + c) for c, s in zip(cs, sigmas))
    h3 = math.fsum(s * polygamma(2, nstart + c) for c, s in zip(cs, sigmas))
    fN = t_start
    d1 = fN * h1
    d3 = fN * (h1 ** 3 + 3 * h1 * h2 + h3)
    tail = tail_int + fN / 2 - d1 / 12 + d3 / 720
    return tail, gamma_tail


def sum_ratio_sequence(ratio_fn, floor: int, n_keep: int,
                       max_n: int = 2 ** 20) -> RecurrenceSum:
    """Direct summation for black-box term ratios (light tails only).

    ratio_fn(n) must return t[n+1]/t[n].  Stops once terms are negligible;
    raises ConvergenceError if the budget is exhausted first.
    """
    terms = [1.0]
    t = 1.0
    n = floor
    total = 1.0
    while True:
        r = ratio_fn(n)
        if r < 0:
            raise DivergenceError(f"negative term ratio at n={n}")
        t *= r
        n += 1
        total += t
        if n - floor <= n_keep:
            terms.append(t)
        if t <= 1e-18 * total and n - floor > n_keep:
            break
        if n - floor > max_n:
            raise ConvergenceError("ratio sequence summation budget exhausted")
    kept = np.array(terms)
    tail_mass = total - math.fsum(kept)
    return RecurrenceSum(kept, floor, total, max(tail_mass, 0.0), None)
