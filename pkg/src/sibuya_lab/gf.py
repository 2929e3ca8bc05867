"""Generating-function core: evaluation, thinning, compounding, coefficient
extraction, and Laplace-mixture machinery.

A Pgf is an immutable value in one of five shapes:

* ``closed_form`` -- a complex-capable callable backed by a catalog family,
* ``thinned``     -- base pgf precomposed with the Bernoulli map 1 - a + a w,
* ``composed``    -- outer(inner(w)),
* ``series``      -- a finite coefficient table,
* ``mixture``     -- the Poisson mixture induced by a Laplace-mixture density.

Every operation is a pure function; values can be shared freely across
threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from . import powerseries
from .errors import (
    ConvergenceError,
    DomainError,
    PmfInvariantError,
    QuadratureError,
    ScalingError,
)

__all__ = [
    "GFunction",
    "LaplaceMixture",
    "PmfTable",
    "Pgf",
    "identity_pgf",
    "mixture_g",
    "mixture_pgf",
    "mixture_rescale",
    "pgf_coefficients",
    "pgf_compound",
    "pgf_eval",
    "pgf_from_callable",
    "pgf_from_table",
    "pgf_thin",
]

_COEFF_FLOOR = -1e-12  # roundoff tolerance before declaring a non-pgf


# ---------------------------------------------------------------------------
# value types


@dataclass(frozen=True)
class PmfTable:
    """Finite pmf prefix p_0..p_N plus estimated tail mass and provenance."""

    probs: np.ndarray
    tail_mass: float = 0.0
    tail_exponent: Optional[float] = None
    provenance: str = "unspecified"
    normalized: bool = True

    def __post_init__(self):
        object.__setattr__(self, "probs",
                           np.ascontiguousarray(self.probs, dtype=float))

    def validate(self) -> "PmfTable":
        p = self.probs
        if p.ndim != 1 or p.size == 0:
            raise PmfInvariantError("pmf table must be a nonempty 1-D array")
        if not np.all(np.isfinite(p)):
            raise PmfInvariantError("pmf table contains non-finite entries")
        if p.min() < _COEFF_FLOOR:
            raise PmfInvariantError(
                f"pmf entry {p.min():.3e} below tolerance {_COEFF_FLOOR}"
            )
        if p.max() > 1.0 + 1e-10:
            raise PmfInvariantError(f"pmf entry {p.max()!r} exceeds 1")
        if self.tail_mass < -1e-12:
            raise PmfInvariantError("negative tail mass")
        if self.normalized:
            total = math.fsum(p.tolist()) + self.tail_mass
            if abs(total - 1.0) > 1e-8:
                raise PmfInvariantError(
                    f"pmf plus tail sums to {total!r}, not 1"
                )
        return self

    @property
    def n_max(self) -> int:
        return len(self.probs) - 1


@dataclass(frozen=True)
class LaplaceMixture:
    """Nonnegative density f on (0, inf) defining Q(w) = E exp(-(1-w)X)."""

    density: Callable[[float], float]
    support_hint: Tuple[float, float] = (0.0, np.inf)
    normalization_tolerance: float = 1e-8
    low_accuracy_below: Optional[float] = None
    label: str = "laplace-mixture"

    def __call__(self, x: float) -> float:
        v = self.density(x)
        if v < 0:
            raise DomainError(
                f"mixture density negative at x={x!r}: {v!r}"
            )
        return v


@dataclass(frozen=True)
class GFunction:
    """The one-step pmf recurrence ratio g(n) = (n+1) p_{n+1} / p_n.

    Either a ratio of polynomials in n (``gnum``/``gden``, monomial
    coefficients, highest degree first -- the amplitude form) or a black-box
    integer sequence.  ``floor`` is the first support point of the pmf the
    recurrence generates.
    """

    gnum: Optional[np.ndarray] = None
    gden: Optional[np.ndarray] = None
    fn: Optional[Callable[[int], float]] = None
    floor: int = 0
    label: str = ""

    @property
    def rational(self) -> bool:
        return self.gnum is not None

    def __call__(self, n: int) -> float:
        if self.fn is not None and not self.rational:
            return float(self.fn(n))
        from .tailsum import _ratio_at  # shared cancellation logic

        return _ratio_at(self.gnum, self.gden, n) * (n + 1.0)


@dataclass(frozen=True)
class Pgf:
    """Immutable probability generating function value."""

    kind: str
    fn: Optional[Callable] = None
    coeffs_fn: Optional[Callable[[int], np.ndarray]] = None
    base: Optional["Pgf"] = None
    a: Optional[float] = None
    outer: Optional["Pgf"] = None
    inner: Optional["Pgf"] = None
    table: Optional[PmfTable] = None
    mixture: Optional[LaplaceMixture] = None
    domain_radius: float = 1.0
    laplace_ok: bool = False
    label: str = ""
    spec: object = field(default=None, compare=False)

    def __repr__(self):  # keep reprs short; payloads are callables/arrays
        return f"Pgf({self.kind}: {self.label or 'anonymous'})"


# ---------------------------------------------------------------------------
# constructors


def pgf_from_callable(fn, *, coeffs_fn=None, laplace_ok=False, label="",
                      domain_radius=1.0, spec=None) -> Pgf:
    """Wrap a complex-capable closed-form evaluator as a Pgf."""
    return Pgf(kind="closed_form", fn=fn, coeffs_fn=coeffs_fn,
               laplace_ok=laplace_ok, label=label,
               domain_radius=domain_radius, spec=spec)


def pgf_from_table(table: PmfTable, *, validate: bool = True,
                   label: str = "series") -> Pgf:
    if validate:
        table.validate()
    return Pgf(kind="series", table=table, label=label)


def identity_pgf() -> Pgf:
    """Point mass at 1: Q(w) = w."""
    t = PmfTable(np.array([0.0, 1.0]), provenance="closed_form")
    return Pgf(kind="series", table=t, label="point-mass-at-1")


# ---------------------------------------------------------------------------
# evaluation


def _eval_raw(p: Pgf, z):
    """Evaluate without domain checks; z may be complex (contour use)."""
    if p.kind in ("closed_form", "mixture"):
        return p.fn(z)
    if p.kind == "thinned":
        return _eval_raw(p.base, 1.0 - p.a + p.a * z)
    if p.kind == "composed":
        return _eval_raw(p.outer, _eval_raw(p.inner, z))
    if p.kind == "series":
        c = p.table.probs
        # Horner; tail mass attributed to "beyond the table", ignored here
        acc = 0.0 * z
        for v in c[::-1]:
            acc = acc * z + v
        return acc
    raise AssertionError(f"unknown pgf kind {p.kind}")


def pgf_eval(p: Pgf, w: float) -> float:
    """Q(w) for real w in [0, domain_radius]."""
    if not (0.0 <= w <= p.domain_radius + 1e-12):
        raise DomainError(
            f"w={w!r} outside [0, {p.domain_radius}] for {p.label or p.kind}"
        )
    v = float(np.real(_eval_raw(p, min(w, p.domain_radius))))
    if p.kind == "series" and p.table.tail_mass > 1e-10 and w == 1.0:
        v += p.table.tail_mass  # account for the mass beyond the table
    return min(max(v, 0.0), 1.0) if -1e-9 <= v <= 1.0 + 1e-9 else v


# ---------------------------------------------------------------------------
# thinning and compounding


def pgf_thin(p: Pgf, a: float) -> Pgf:
    """Thinned pgf w -> Q(1 - a + a w); a > 1 only for Laplace-representable
    pgfs."""
    if a <= 0:
        raise DomainError(f"thinning scale a={a!r} must be positive")
    if a == 1.0:
        return p
    if a > 1.0 and not p.laplace_ok:
        raise ScalingError(
            f"a={a} > 1 requires a Laplace-mixture representation; "
            f"{p.label or p.kind} is not known to have one"
        )
    return Pgf(kind="thinned", base=p, a=float(a), laplace_ok=p.laplace_ok,
               label=f"thin({p.label or p.kind}, a={a})")


def pgf_compound(outer: Pgf, inner: Pgf) -> Pgf:
    """Compound pgf outer(inner(w)) -- the pgf of a random sum."""
    top = float(np.real(_eval_raw(inner, 1.0)))
    if top > outer.domain_radius + 1e-9:
        raise DomainError(
            f"inner pgf reaches {top!r}, beyond outer domain radius "
            f"{outer.domain_radius!r}"
        )
    return Pgf(kind="composed", outer=outer, inner=inner,
               label=f"({outer.label or 'outer'} o {inner.label or 'inner'})")


# ---------------------------------------------------------------------------
# coefficient extraction


def _contour_coefficients(p: Pgf, n_max: int) -> np.ndarray:
    """Taylor coefficients by FFT of circle samples, doubling the node count
    until two successive grids agree below 1e-9.

    The radius balances branch-point aliasing against the rho^-n roundoff
    amplification; anything far inside the disk destroys double-precision
    accuracy for n ~ 100.
    """
    rho = min(0.995 * p.domain_radius, max(0.5, 1e-4 ** (1.0 / max(n_max, 8))))
    m = 1 << max(int(np.ceil(np.log2(8 * max(n_max, 1)))), 8)
    prev = None
    while m <= (1 << 18):
        theta = 2.0 * np.pi * np.arange(m) / m
        zs = rho * np.exp(1j * theta)
        vals = np.asarray([_eval_raw(p, z) for z in zs], dtype=complex)
        coeffs = np.fft.fft(vals)[: n_max + 1] / m
        coeffs = np.real(coeffs) / rho ** np.arange(n_max + 1)
        if prev is not None and np.max(np.abs(coeffs - prev)) < 1e-9:
            return coeffs
        prev = coeffs
        m *= 2
    raise ConvergenceError(
        "contour coefficient extraction did not stabilize below 1e-9"
    )


def _thinned_coefficients(base: Pgf, a: float, n_max: int) -> np.ndarray:
    """Binomial mixing: p'_m = sum_n p_n C(n,m) a^m (1-a)^(n-m), a in (0,1).

    The base table is extended until the neglected rows contribute less than
    1e-14 to every requested coefficient.
    """
    if a >= 1.0:
        raise ValueError("binomial mixing path requires a < 1")
    n_base = max(4 * n_max + 16, 64)
    log1ma = math.log1p(-a)
    # contribution of base row n to any m <= n_max is < C(n,n_max)a^m(1-a)^(n-m)
    while n_base < 10 ** 6:
        bound = (math.lgamma(n_base + 1) - math.lgamma(n_max + 1)
                 - math.lgamma(n_base - n_max + 1)
                 + (n_base - n_max) * log1ma)
        if bound < math.log(1e-16):
            break
        n_base *= 2
    base_tab = pgf_coefficients(base, n_base).probs
    out = np.zeros(n_max + 1)
    n = np.arange(n_base + 1, dtype=float)
    from scipy.special import gammaln

    lgn = gammaln(n + 1)
    # column m: sum_n p_n * C(n, m) a^m (1-a)^(n-m)
    for m in range(n_max + 1):
        rows = np.arange(m, n_base + 1)
        lw = (lgn[rows] - lgn[m] - gammaln(rows - m + 1)
              + m * math.log(a) + (rows - m) * log1ma)
        out[m] = float(np.exp(lw) @ base_tab[rows])
    return out


def pgf_coefficients(p: Pgf, n_max: int) -> PmfTable:
    """Taylor coefficients p_0..p_n_max of the pgf.

    Prefers an analytic coefficient path (family recurrence / table /
    triangular composition); falls back to contour quadrature.
    """
    if n_max < 0:
        raise DomainError("n_max must be >= 0")
    if p.coeffs_fn is not None:
        c = np.asarray(p.coeffs_fn(n_max), float)[: n_max + 1]
        if len(c) < n_max + 1:
            c = np.pad(c, (0, n_max + 1 - len(c)))
        return _as_table(c, p, "recurrence")
    if p.kind == "series":
        c = p.table.probs[: n_max + 1]
        if len(c) < n_max + 1:
            c = np.pad(c, (0, n_max + 1 - len(c)))
        return PmfTable(c, tail_mass=p.table.tail_mass,
                        tail_exponent=p.table.tail_exponent,
                        provenance=p.table.provenance,
                        normalized=p.table.normalized)
    if p.kind == "thinned" and p.a < 1.0:
        return _as_table(_thinned_coefficients(p.base, p.a, n_max), p,
                         "binomial-mixing")
    if p.kind == "composed":
        inner_tab = pgf_coefficients(p.inner, n_max).probs
        if abs(inner_tab[0]) <= 1e-13:
            outer_tab = pgf_coefficients(p.outer, n_max).probs
            c = powerseries.compose(outer_tab, inner_tab, n_max)
            return _as_table(c, p, "series-composition")
    return _as_table(_contour_coefficients(p, n_max), p, "quadrature")


def _as_table(c: np.ndarray, p: Pgf, provenance: str) -> PmfTable:
    if c.min() < _COEFF_FLOOR:
        raise PmfInvariantError(
            f"coefficient {c.min():.3e} of {p.label or p.kind} below "
            f"{_COEFF_FLOOR}; not a pgf within tolerance"
        )
    tail = float(np.real(_eval_raw(p, 1.0))) - math.fsum(np.clip(c, 0, None))
    return PmfTable(c, tail_mass=max(tail, 0.0), provenance=provenance)


# ---------------------------------------------------------------------------
# Laplace mixtures


def _quad_mixture(f: Callable[[float], float], lo: float, hi: float) -> float:
    """Adaptive quadrature split at x=1 with exponential substitution on the
    tail: densities here have integrable x^(-gamma) heads and power tails.

    The tail is integrated in fixed blocks of the log variable until a block
    stops contributing, which keeps QUADPACK away from overflowing exp().
    """
    total = 0.0
    try:
        if lo < 1.0:
            v, err = quad(f, lo, min(hi, 1.0), epsabs=1e-300, epsrel=1e-10,
                          limit=400)
            _check_quad(v, err)
            total += v
        if hi > 1.0:
            t_hi = math.log(hi) if np.isfinite(hi) else 690.0
            t = math.log(max(lo, 1.0))
            g = lambda t_: f(math.exp(t_)) * math.exp(t_)
            while t < t_hi:
                t_next = min(t + 30.0, t_hi)
                v, err = quad(g, t, t_next, epsabs=1e-300, epsrel=1e-10,
                              limit=400)
                _check_quad(v, err)
                total += v
                if abs(v) < 1e-13 * max(abs(total), 1e-300):
                    break
                t = t_next
    except IntegrationWarning as exc:  # pragma: no cover - quad warns instead
        raise QuadratureError(str(exc)) from exc
    return total


def _check_quad(value: float, err: float) -> None:
    if not np.isfinite(value):
        raise QuadratureError("quadrature returned a non-finite value")
    if err > 1e-7 * max(abs(value), 1e-12):
        raise QuadratureError(
            f"quadrature error estimate {err!r} too large for value {value!r}"
        )


def _mixture_norm(m: LaplaceMixture) -> float:
    lo, hi = m.support_hint
    z = _quad_mixture(m, max(lo, 0.0), hi)
    if abs(z - 1.0) > m.normalization_tolerance:
        raise DomainError(
            f"mixture density integrates to {z!r}; expected 1 within "
            f"{m.normalization_tolerance}"
        )
    return z


def mixture_pgf(m: LaplaceMixture) -> Pgf:
    """The pgf Q(w) = integral exp(-(1-w)x) f(x) dx of a mixed Poisson law."""
    _mixture_norm(m)
    lo, hi = m.support_hint

    def fn(w):
        wr = float(np.real(w))
        if abs(np.imag(w)) > 1e-12:
            raise DomainError("mixture pgf evaluation is real-only")
        return _quad_mixture(lambda x: math.exp(-(1.0 - wr) * x) * m(x),
                             max(lo, 0.0), hi)

    def coeffs_fn(n_max):
        p0 = _quad_mixture(lambda x: math.exp(-x) * m(x), max(lo, 0.0), hi)
        out = np.empty(n_max + 1)
        out[0] = p0
        for n in range(n_max):
            out[n + 1] = out[n] * mixture_g(m, n) / (n + 1.0)
        return out

    return Pgf(kind="mixture", fn=fn, coeffs_fn=coeffs_fn, mixture=m,
               laplace_ok=True, label=m.label)


def mixture_g(m: LaplaceMixture, n: int) -> float:
    """g(n) for the mixture pgf: the ratio of two exponential moments of f."""
    lo, hi = m.support_hint
    lo = max(lo, 0.0)

    def mom(k):
        return _quad_mixture(
            lambda x: math.exp(-x + k * math.log(x)) * m(x), lo, hi
        )

    denom = mom(n)
    if denom <= 0:
        raise QuadratureError(f"vanishing moment integral at n={n}")
    return mom(n + 1) / denom


def mixture_rescale(m: LaplaceMixture, b: float) -> LaplaceMixture:
    """Density of the rescaled law whose pgf is Q(bw)/Q(b), b in (0, 1]."""
    if not 0.0 < b <= 1.0:
        raise DomainError(f"rescale factor b={b!r} outside (0, 1]")
    if b == 1.0:
        return m
    lo, hi = m.support_hint
    rate = (1.0 - b) / b
    # f_b(x) = e^{-(1-b)x/b} f(x/b) / Z(b), Z(b) = b * E e^{-(1-b)X}
    z = _quad_mixture(lambda x: math.exp(-rate * b * x) * m(x),
                      max(lo, 0.0), hi) * b
    return LaplaceMixture(
        density=lambda x: math.exp(-rate * x) * m.density(x / b) / z,
        support_hint=(lo * b, hi * b if np.isfinite(hi) else np.inf),
        normalization_tolerance=m.normalization_tolerance,
        low_accuracy_below=(m.low_accuracy_below * b
                            if m.low_accuracy_below else None),
        label=f"rescale({m.label}, b={b})",
    )
