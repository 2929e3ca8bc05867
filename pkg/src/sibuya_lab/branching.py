"""Galton-Watson progeny analysis.

The total-progeny pgf Q and the offspring pgf H are linked by the fixed
point Q(w) = w H(Q(w)); inverting gives H(u) = u / Q^{-1}(u).  For the
extended Sibuya progeny the inversion has the closed form

    H(u, b, gamma) = u b / (1 - (1 - u c)^(1/gamma)),  c = 1 - (1-b)^gamma,

with the logarithmic-case form H(u, b, 0) = b u / (1 - (1-b)^u) at the
removable gamma = 0 singularity.  Whether such an H is an honest offspring
law is decided by the signs of its expansion coefficients, which is what the
diagnosis below reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import powerseries
from .errors import BudgetError, DomainError, InversionError
from .gf import Pgf, PmfTable, pgf_coefficients, pgf_from_table

__all__ = [
    "BranchingModel",
    "OffspringInversion",
    "extended_sibuya_offspring_coeffs",
    "offspring_from_progeny",
    "offspring_moments",
    "offspring_pgf_value",
    "progeny_sign_diagnosis",
    "simulate_progeny",
]

_SIGN_TOL = -1e-12


# ---------------------------------------------------------------------------
# closed forms for the extended Sibuya progeny


def _c_of(b: float, g: float) -> float:
    return -math.expm1(g * math.log1p(-b)) if b < 1.0 else 1.0


def offspring_pgf_value(u: float, b: float, gamma: float) -> float:
    """H(u, b, gamma) evaluated pointwise (gamma = 0 uses the log form)."""
    if not 0.0 < b <= 1.0:
        raise DomainError(f"b in (0,1] required, got {b}")
    if gamma == 0.0:
        if b == 1.0:
            raise DomainError("gamma = 0 requires b < 1")
        if u == 0.0:
            return -b / math.log1p(-b)
        return b * u / -math.expm1(u * math.log1p(-b))
    c = _c_of(b, gamma)
    if u == 0.0:
        return b * gamma / c
    if u == 1.0:
        return 1.0
    return u * b / (1.0 - (1.0 - u * c) ** (1.0 / gamma))


def extended_sibuya_offspring_coeffs(b: float, gamma: float,
                                     n_max: int) -> np.ndarray:
    """Expansion coefficients of H(u, b, gamma) through order n_max.

    Built by compensated series division of u*b by the denominator series,
    so a zero coefficient (like the u^3 term at gamma = 0) stays at roundoff
    rather than picking up bias.
    """
    if not 0.0 < b <= 1.0:
        raise DomainError(f"b in (0,1] required, got {b}")
    if gamma == -1.0:
        # exact: H = (1-b) + b u; division noise would grow like |c|^n here
        out = np.zeros(n_max + 1)
        out[0] = 1.0 - b
        if n_max >= 1:
            out[1] = b
        return out
    num = np.zeros(n_max + 2)
    num[1] = b
    den = np.zeros(n_max + 2)
    if gamma == 0.0:
        if b == 1.0:
            raise DomainError("gamma = 0 requires b < 1")
        # 1 - (1-b)^u = -sum_{t>=1} (u log(1-b))^t / t!
        logb = math.log1p(-b)
        term = 1.0
        for t in range(1, n_max + 2):
            term *= logb / t
            den[t] = -term
    else:
        c = _c_of(b, gamma)
        # 1 - (1-uc)^(1/g) = -sum_{t>=1} binom(1/g, t) (-c)^t u^t
        binom = 1.0
        x = 1.0 / gamma
        for t in range(1, n_max + 2):
            binom *= (x - (t - 1)) / t
            den[t] = -binom * (-c) ** t
    return powerseries.divide(num, den, n_max)


def offspring_moments(b: float, gamma: float):
    """(mean, second factorial moment) of the offspring law H(., b, gamma).

    At b = 1 the mean is the critical value 1 and the second moment takes
    its limit: 0 below gamma = 1/2, 2 at 1/2, infinite above.
    """
    if not 0.0 < b <= 1.0:
        raise DomainError(f"b in (0,1] required, got {b}")
    if gamma == 0.0:
        if b == 1.0:
            raise DomainError("gamma = 0 requires b < 1")
        ell = math.log1p(-b)  # < 0
        d1 = -ell * (1.0 - b)
        d2 = -ell * ell * (1.0 - b)
        k1 = 1.0 - d1 / b
        k2 = 2.0 * d1 * d1 / (b * b) - 2.0 * d1 / b - d2 / b
        return k1, k2
    if b == 1.0:
        if gamma < 0.5:
            return 1.0, 0.0
        if gamma == 0.5:
            return 1.0, 2.0
        return 1.0, math.inf
    c = _c_of(b, gamma)
    k1 = 1.0 - c * (1.0 - b) ** (1.0 - gamma) / (b * gamma)
    bracket = (2.0 * c * (1.0 - b) + c * b * (1.0 + gamma)
               - 2.0 * gamma * b)
    k2 = c * (1.0 - b) ** (1.0 - 2.0 * gamma) / (gamma * gamma * b * b) \
        * bracket
    return k1, k2


# ---------------------------------------------------------------------------
# inversion and diagnosis


@dataclass(frozen=True)
class OffspringInversion:
    coefficients: np.ndarray
    negative_indices: tuple
    pgf: Optional[Pgf]  # None when the coefficients are not a pmf

    @property
    def is_offspring_law(self) -> bool:
        return not self.negative_indices


def offspring_from_progeny(q: Pgf, n_max: int) -> OffspringInversion:
    """Recover H(u) = u / Q^{-1}(u) from a candidate progeny pgf Q.

    Requires Q(0) = 0 and a positive linear coefficient; reports the indices
    of any negative expansion coefficients (a nonempty list means Q is not
    the progeny of any branching process).
    """
    qc = pgf_coefficients(q, n_max + 1).probs
    if abs(qc[0]) > 1e-12:
        raise InversionError("progeny pgf must vanish at 0")
    if qc[1] <= 1e-12:
        raise InversionError("progeny pgf needs p_1 > 0 to invert")
    w = powerseries.revert(qc, n_max + 1)
    num = np.zeros(n_max + 2)
    num[1] = 1.0
    h = powerseries.divide(num, w, n_max)
    scale = np.maximum.accumulate(np.maximum(np.abs(h), 1e-30))
    neg = tuple(int(i) for i in
                np.flatnonzero(h < _SIGN_TOL * np.maximum(scale, 1.0)))
    pgf = None
    if not neg:
        pgf = pgf_from_table(
            PmfTable(np.clip(h, 0.0, None),
                     tail_mass=max(1.0 - float(np.clip(h, 0, None).sum()), 0.0),
                     provenance="series-reversion", normalized=False),
            validate=False, label="offspring-from-progeny")
    return OffspringInversion(coefficients=h, negative_indices=neg, pgf=pgf)


def progeny_sign_diagnosis(b: float, gamma: float, n_max: int) -> dict:
    """Sign pattern of the extended-Sibuya offspring expansion.

    The closed-form case split: no negative coefficient for gamma in
    [1/2, 1) or gamma = -1; first negative at u^2 for gamma < -1, at u^3 for
    -1 < gamma < 0, at u^4 for gamma = 0; some negative coefficient for
    0 < gamma < 1/2.
    """
    h = extended_sibuya_offspring_coeffs(b, gamma, n_max)
    scale = np.maximum.accumulate(np.maximum(np.abs(h), 1e-30))
    neg = np.flatnonzero(h < _SIGN_TOL * np.maximum(scale, 1.0))
    first = int(neg[0]) if neg.size else None
    return {
        "b": b,
        "gamma": gamma,
        "n_max": n_max,
        "first_negative": first,
        "is_progeny_evidence": first is None,
        "coefficients_head": h[: min(8, len(h))].tolist(),
    }


# ---------------------------------------------------------------------------
# branching model and simulation


@dataclass(frozen=True)
class BranchingModel:
    offspring: Pgf
    mean_offspring: float
    second_factorial: float
    criticality: str

    @staticmethod
    def _criticality(mean: float) -> str:
        if abs(mean - 1.0) <= 1e-12:
            return "critical"
        return "subcritical" if mean < 1.0 else "supercritical"

    @classmethod
    def from_pgf(cls, offspring: Pgf, mean: float,
                 second_factorial: float) -> "BranchingModel":
        return cls(offspring, mean, second_factorial,
                   cls._criticality(mean))

    @classmethod
    def from_extended_sibuya(cls, b: float, gamma: float,
                             n_tab: int = 2048) -> "BranchingModel":
        """Offspring model whose total progeny is extended Sibuya(b, gamma).

        Only gamma in [1/2, 1) (or gamma = -1) gives a true offspring law.
        """
        coeffs = extended_sibuya_offspring_coeffs(b, gamma, n_tab)
        if coeffs.min() < _SIGN_TOL * max(1.0, np.abs(coeffs).max()):
            raise DomainError(
                f"H(u, b={b}, gamma={gamma}) has negative coefficients; "
                f"no offspring law exists"
            )
        k1, k2 = offspring_moments(b, gamma)
        table = PmfTable(np.clip(coeffs, 0.0, None),
                         tail_mass=max(1.0 - float(np.clip(coeffs, 0, None).sum()), 0.0),
                         provenance="series", normalized=False)
        return cls(pgf_from_table(table, validate=False,
                                  label=f"offspring(b={b}, gamma={gamma})"),
                   k1, k2, cls._criticality(k1))


def simulate_progeny(model: BranchingModel, replicas: int, seed: int, *,
                     node_budget: int = 10_000,
                     n_max: int = 200) -> PmfTable:
    """Total-progeny law by breadth-first population simulation.

    Offspring counts are drawn by inversion on the cached cumulative table
    of the offspring pgf (tail cut at cumulative 1 - 1e-12, residual on the
    last state).  Replicas whose population exceeds the node budget are
    counted into tail_mass; more than 20% of them raises BudgetError.
    """
    if model.criticality == "supercritical":
        raise DomainError("total progeny is finite only for mean <= 1")
    from .sampling import rng_stream

    probs = pgf_coefficients(model.offspring, 4096).probs
    cum = np.cumsum(probs)
    cut = int(np.searchsorted(cum, 1.0 - 1e-12)) + 1
    cum = cum[:cut]
    cum[-1] = max(cum[-1], 1.0)  # residual tail assigned to the last state

    rng = rng_stream(seed, 0)
    queue = np.ones(replicas, dtype=np.int64)
    total = np.ones(replicas, dtype=np.int64)
    active = np.arange(replicas)
    capped = 0
    while active.size:
        counts = queue[active]
        owners = np.repeat(np.arange(active.size), counts)
        draws = np.searchsorted(cum, rng.random(int(counts.sum())),
                                side="right")
        born = np.bincount(owners, weights=draws,
                           minlength=active.size).astype(np.int64)
        queue[active] = born
        total[active] += born
        over = total[active] > node_budget
        capped += int(over.sum())
        active = active[(born > 0) & ~over]
    if capped > 0.2 * replicas:
        raise BudgetError(
            f"{capped}/{replicas} replicas exceeded the node budget "
            f"{node_budget}; the model is too close to critical for it"
        )
    ok = total[total <= node_budget]
    counts = np.bincount(np.clip(ok, 0, n_max + 1), minlength=n_max + 2)
    probs_emp = counts[: n_max + 1] / replicas
    tail = (len(ok) - counts[: n_max + 1].sum() + capped) / replicas
    return PmfTable(probs_emp, tail_mass=float(tail),
                    provenance="progeny-simulation")
