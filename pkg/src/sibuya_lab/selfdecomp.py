"""Numeric self-decomposability machinery.

Three finite checks, none of which ever claims the infinite property:

* the Bondesson sufficient criterion on a strictly decreasing pmf,
* the residual pgf H_a(w) = G(w)/G(1-a+aw) by compensated series division
  (self-decomposability evidence = no coefficient below -1e-10),
* the Sibuya-compounding closure of self-decomposable laws as a testable
  coefficient property.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from . import powerseries
from .errors import (
    DivisionInstabilityError,
    NotDecreasingError,
    NumericalUnderflowError,
)
from .gf import Pgf, PmfTable, pgf_coefficients, pgf_compound, pgf_thin

__all__ = [
    "BondessonReport",
    "bondesson_check",
    "bondesson_check_family",
    "residual_pgf",
    "residual_nonnegative",
    "sibuya_compound_closure",
]

_EVIDENCE_FLOOR = -1e-10


@dataclass(frozen=True)
class BondessonReport:
    holds_up_to: int
    first_violation: Optional[Tuple[int, float, float]]  # (j, lhs, rhs)

    @property
    def holds(self) -> bool:
        return self.first_violation is None

    def to_json_dict(self) -> dict:
        return {
            "holds_up_to": self.holds_up_to,
            "first_violation": (None if self.first_violation is None
                                else list(self.first_violation)),
        }


def bondesson_check(pmf: PmfTable, j_max: int) -> BondessonReport:
    """Check max_{n<=j} r_{n+1}/r_n <= (j+2)/(j+1) *
    (r_{j+1}-r_{j+2})/(r_j-r_{j+1}) for every j <= j_max.

    Success is sufficient for discrete self-decomposability; the report only
    ever asserts absence of violation up to j_max.  The pmf must be strictly
    decreasing over the checked range.  Ratios are formed in log space so the
    check survives deep into the representable tail.
    """
    r = np.asarray(pmf.probs, float)
    if len(r) < j_max + 3:
        raise ValueError(
            f"need pmf entries through {j_max + 2}, got {len(r) - 1}"
        )
    r = r[: j_max + 3]
    if np.any(r <= 0.0):
        raise NumericalUnderflowError(
            "pmf underflowed to zero inside the checked range"
        )
    logs = np.log(r)
    rho = np.exp(np.diff(logs))  # r_{n+1} / r_n
    if np.any(rho >= 1.0):
        bad = int(np.flatnonzero(rho >= 1.0)[0])
        raise NotDecreasingError(
            f"pmf not strictly decreasing at n={bad}: ratio {rho[bad]!r}"
        )
    running_max = np.maximum.accumulate(rho[: j_max + 1])
    for j in range(j_max + 1):
        lhs = running_max[j]
        rhs = ((j + 2.0) / (j + 1.0) * rho[j]
               * (1.0 - rho[j + 1]) / (1.0 - rho[j]))
        if lhs > rhs:
            return BondessonReport(holds_up_to=j - 1,
                                   first_violation=(j, float(lhs), float(rhs)))
    return BondessonReport(holds_up_to=j_max, first_violation=None)


def bondesson_check_family(spec, j_max: int) -> BondessonReport:
    """Run the Bondesson check on a catalog family's pmf table."""
    from .families import pmf_table

    return bondesson_check(pmf_table(spec, j_max + 2), j_max)


# ---------------------------------------------------------------------------
# residual pgf


def residual_pgf(p: Pgf, a: float, n_max: int) -> PmfTable:
    """Coefficients of H_a(w) = G(w)/G(1-a+aw) by series division.

    If G is self-decomposable this is the pgf of the innovation Y_a; the
    numeric evidence is that no coefficient drops below -1e-10 (scaled by the
    running magnitude).  Entries are returned unclipped.
    """
    if not 0.0 < a < 1.0:
        raise DivisionInstabilityError(
            f"residual defined for a in (0,1), got {a!r}"
        )
    num = pgf_coefficients(p, n_max).probs
    den = pgf_coefficients(pgf_thin(p, a), n_max).probs
    lead = den[np.flatnonzero(np.abs(den) > 0)[0]] if np.any(den) else 0.0
    if lead < 1e-12:
        raise DivisionInstabilityError(
            f"thinned pgf leading coefficient {lead!r} below 1e-12"
        )
    q = powerseries.divide(num, den, n_max)
    return PmfTable(q, tail_mass=0.0, provenance="series-division",
                    normalized=False)


def residual_nonnegative(p: Pgf, a: float, n_max: int) -> dict:
    """Evidence report: residual coefficients vs the -1e-10 floor scaled by
    the running coefficient magnitude."""
    q = residual_pgf(p, a, n_max).probs
    scale = np.maximum.accumulate(np.maximum(np.abs(q), 1e-30))
    bad = np.flatnonzero(q < _EVIDENCE_FLOOR * np.maximum(scale, 1.0))
    return {
        "a": a,
        "n_max": n_max,
        "min_coefficient": float(q.min()),
        "first_negative": int(bad[0]) if bad.size else None,
        "nonnegative": bad.size == 0,
    }


def sibuya_compound_closure(spec, gamma: float, a_list: Sequence[float],
                            n_max: int) -> dict:
    """Testable content of the closure theorem: for self-decomposable Q and
    G = Q o S(gamma), every residual G(w)/G(1-a+aw) has nonnegative
    coefficients."""
    from .families import make_pgf, make_spec

    outer = make_pgf(spec)
    inner = make_pgf(make_spec("sibuya", gamma=gamma)) if gamma < 1.0 else None
    g = pgf_compound(outer, inner) if inner is not None else outer
    per_a = {a: residual_nonnegative(g, a, n_max) for a in a_list}
    return {
        "family": spec.family,
        "gamma": gamma,
        "n_max": n_max,
        "per_a": per_a,
        "all_nonnegative": all(v["nonnegative"] for v in per_a.values()),
    }
