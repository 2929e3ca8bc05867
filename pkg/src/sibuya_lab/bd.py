"""Birth-death machinery: stationary solver, amplitude catalog,
hypergeometric pgf construction, and an event-driven simulator.

A BdModel holds elementary amplitudes: state j gives birth at rate
lambda_j = sum_k alpha_k (j)_k and dies at rate mu_j = j sum_k beta_k
(j-1)_k, with (j)_k the falling factorial.  The stationary law satisfies
detailed balance mu_{j+1} p_{j+1} = lambda_j p_j, i.e. the one-step
recurrence with g(n) = sum alpha_k (n)_k / sum beta_k (n)_k.

The chain is restricted to {floor, floor+1, ...}: deaths out of the floor
state are suppressed so families supported on {1, 2, ...} keep their support.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    ConvergenceError,
    DivergenceError,
    DomainError,
    ExplosionError,
    NegativeAmplitudeError,
    RateError,
    UnsupportedError,
)
from .families import DistributionSpec, make_spec, pmf_table
from .gf import GFunction, Pgf, PmfTable
from .tailsum import _ratio_at, sum_rational_recurrence

__all__ = [
    "BdModel",
    "StationarySolution",
    "TrajectoryStats",
    "amplitudes_for",
    "hypergeometric_pgf",
    "model_from_json",
    "model_to_json",
    "simulate_ctmc",
    "stationary_solve",
]


def _falling_poly(k: int) -> np.ndarray:
    """Monomial coefficients (highest first) of (n)_k = n(n-1)...(n-k+1)."""
    if k == 0:
        return np.array([1.0])
    return np.poly(np.arange(k, dtype=float))  # roots 0..k-1


def _amplitude_poly(coeffs: np.ndarray) -> np.ndarray:
    acc = np.zeros(1)
    for k, c in enumerate(coeffs):
        if c == 0.0:
            continue
        term = c * _falling_poly(k)
        n = max(len(acc), len(term))
        acc = np.pad(acc, (n - len(acc), 0)) + np.pad(term, (n - len(term), 0))
    return np.trim_zeros(acc, "f") if np.any(acc) else np.array([0.0])


@dataclass(frozen=True)
class BdModel:
    """Elementary birth amplitudes alpha_0..alpha_l and death amplitudes
    beta_0..beta_m, plus the first support point."""

    alpha: np.ndarray
    beta: np.ndarray
    floor: int = 0

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, float))
        object.__setattr__(self, "beta", np.asarray(self.beta, float))
        if self.alpha.ndim != 1 or self.beta.ndim != 1:
            raise RateError("amplitude vectors must be 1-D")
        if not (np.any(self.alpha > 0) and np.any(self.beta > 0)):
            raise RateError("need at least one positive alpha and beta")
        if self.floor < 0:
            raise RateError("floor state must be >= 0")

    def birth_rate(self, j) -> np.ndarray:
        j = np.asarray(j, float)
        return np.polyval(_amplitude_poly(self.alpha), j)

    def death_rate(self, j) -> np.ndarray:
        j = np.asarray(j, float)
        return j * np.polyval(_amplitude_poly(self.beta), j - 1.0)

    def g_polynomials(self):
        """(numerator, denominator) of g(n); detailed balance gives
        p_{j+1}/p_j = g(j)/(j+1) with g = N/D."""
        return _amplitude_poly(self.alpha), _amplitude_poly(self.beta)


@dataclass(frozen=True)
class StationarySolution:
    pmf: PmfTable
    g: GFunction
    hyper_a: tuple
    hyper_b: tuple
    z: float
    floor: int
    normalizer: float
    balance_residual: float


def model_to_json(model: BdModel) -> str:
    return json.dumps({"alpha": model.alpha.tolist(),
                       "beta": model.beta.tolist(),
                       "floor": model.floor})


def model_from_json(text: str) -> BdModel:
    d = json.loads(text)
    return BdModel(np.asarray(d["alpha"], float),
                   np.asarray(d["beta"], float),
                   int(d.get("floor", 0)))


# ---------------------------------------------------------------------------
# stationary solution


def _effective_floor(gnum, gden, floor: int, probe: int) -> int:
    """First support point: smallest i >= floor with g(j) > 0 for all
    j in [i, probe] and g(i-1) <= 0 (or i == floor)."""
    gs = np.array([_g_value(gnum, gden, j) for j in range(floor, probe + 1)])
    nonpos = np.flatnonzero(gs <= 0.0)
    if nonpos.size == 0:
        return floor
    if nonpos[-1] == probe - floor:
        raise DivergenceError("g(n) is nonpositive through the probe range; "
                              "no support above the floor")
    return floor + int(nonpos[-1]) + 1


def _g_value(gnum, gden, n: int) -> float:
    return _ratio_at(gnum, gden, n) * (n + 1.0)


def stationary_solve(model: BdModel, n_max: int) -> StationarySolution:
    """Stationary pmf by the detailed-balance product, built in log space and
    normalized with Euler-Maclaurin tail completion.

    Raises DivergenceError when the product series is not normalizable and
    RateError when a rate is negative on the support.
    """
    gnum, gden = model.g_polynomials()
    probe = max(n_max + 2, 64)
    floor = _effective_floor(gnum, gden, model.floor, probe)
    if floor > n_max:
        raise DomainError(f"support floor {floor} exceeds n_max={n_max}")

    js = np.arange(floor, probe + 1, dtype=float)
    lam = model.birth_rate(js)
    mu_next = model.death_rate(js + 1.0)
    if np.any(lam < -1e-12 * np.abs(lam).max()):
        raise RateError("negative birth rate on the support")
    if np.any(mu_next < 0.0):
        raise RateError("negative death rate on the support")
    # mu_{j+1} = 0 is tolerable only at 0/0 states where the cancelled g
    # carries the balance (e.g. the quadratic geometric amplitudes)
    degenerate = mu_next == 0.0
    if np.any(degenerate & (lam > 0.0)):
        raise RateError("positive birth feeds a state with zero death rate; "
                        "the detailed-balance product is undefined")

    rs = sum_rational_recurrence(gnum, gden, floor, n_max)
    probs = np.zeros(n_max + 1)
    probs[floor:floor + len(rs.terms)] = rs.terms / rs.total
    table = PmfTable(probs, tail_mass=rs.tail_mass / rs.total,
                     tail_exponent=rs.tail_exponent,
                     provenance="recurrence").validate()

    # detailed-balance residual, relative to the flux scale
    j = np.arange(floor, n_max, dtype=float)
    flux_up = model.birth_rate(j) * probs[floor:n_max]
    flux_dn = model.death_rate(j + 1.0) * probs[floor + 1:n_max + 1]
    residual = float(np.max(np.abs(flux_dn - flux_up)
                            / np.maximum(flux_up, 1e-300))) if len(j) else 0.0

    roots_a = np.roots(gnum) if len(gnum) > 1 else np.array([])
    roots_b = np.roots(gden) if len(gden) > 1 else np.array([])
    hyper_a = tuple(sorted(np.real(-roots_a).tolist()))
    hyper_b = tuple(sorted(np.real(-roots_b).tolist()))
    z = float(gnum[0] / gden[0])
    gfun = GFunction(gnum=gnum, gden=gden, floor=floor,
                     label="stationary-bd")
    return StationarySolution(pmf=table, g=gfun, hyper_a=hyper_a,
                              hyper_b=hyper_b, z=z, floor=floor,
                              normalizer=rs.total, balance_residual=residual)


# ---------------------------------------------------------------------------
# family -> amplitudes


def amplitudes_for(spec: DistributionSpec) -> BdModel:
    """Elementary amplitudes whose stationary law is the given family,
    normalized so the highest nonzero beta equals 1."""
    f = spec.family
    if f == "generalized_sibuya":
        nu, g = spec["nu"], spec["gamma"]
        alpha = np.array([nu - g, 2.0 + nu - g, 1.0])
        beta = np.array([nu + 1.0, 1.0])
        floor = 1
    elif f == "shifted_generalized_sibuya":
        nu, g = spec["nu"], spec["gamma"]
        alpha = np.array([1.0 + nu - g, 3.0 + nu - g, 1.0])
        beta = np.array([nu + 2.0, 1.0])
        floor = 0
    elif f == "extended_sibuya":
        b, g = spec["b"], spec["gamma"]
        alpha = np.array([0.0, b * (1.0 - g), b])
        beta = np.array([0.0, 1.0])
        floor = 1
    elif f == "shifted_extended_sibuya":
        b, g = spec["b"], spec["gamma"]
        alpha = np.array([b * (1.0 - g), b * (3.0 - g), b])
        beta = np.array([2.0, 1.0])
        floor = 0
    elif f == "nbd":
        q, k = spec["q"], spec["k"]
        alpha = np.array([q * k, q])
        beta = np.array([1.0])
        floor = 0
    elif f == "geometric":
        lam = spec["lam"]
        th = lam / (1.0 + lam)
        alpha = np.array([0.0, 2.0 * th, th])
        beta = np.array([0.0, 1.0])
        floor = 0
    elif f == "cmp2":
        alpha = np.array([spec["theta"]])
        beta = np.array([1.0, 1.0])
        floor = 0
    elif f == "logarithmic":
        th = spec["theta"]
        alpha = np.array([0.0, th, th])
        beta = np.array([0.0, 1.0])
        floor = 1
    elif f == "zero_inflated_log":
        th = spec["theta"]
        alpha = np.array([th, 3.0 * th, th])
        beta = np.array([2.0, 1.0])
        floor = 0
    else:
        raise UnsupportedError(f"no amplitude mapping for family {f!r}")
    if np.any(alpha < 0.0) or np.any(beta < 0.0):
        bad = alpha.min() if alpha.min() < 0 else beta.min()
        raise NegativeAmplitudeError(
            f"amplitude mapping for {spec} yields a negative coefficient "
            f"({bad:g}); the birth-death reading breaks down, use the "
            f"g-function path instead"
        )
    return BdModel(alpha, beta, floor)


# ---------------------------------------------------------------------------
# hypergeometric pgf


def hypergeometric_pgf(sol: StationarySolution, n_terms: int = 100_000) -> Pgf:
    """Power-series-distribution pgf Q(w) = H(zw)/H(z) rebuilt from the
    hypergeometric parameters (a, b, z) of the stationary solution.

    The series is resummed from the roots, so agreement with the solution
    pmf is a real identity check, not a tautology.
    """
    a, b, z = sol.hyper_a, sol.hyper_b, sol.z
    if len(a) > 3 or len(b) > 3:
        raise UnsupportedError("hypergeometric construction limited to "
                               "l, m <= 3")
    floor = sol.floor

    def terms_ratio(n: float, w: float) -> float:
        num = z * w
        for ai in a:
            num *= n + ai
        den = n + 1.0
        for bj in b:
            den *= n + bj
        return num / den

    def h_series(w: float) -> float:
        acc = 0.0
        term = 1.0
        n = float(floor)
        while True:
            acc += term
            nxt = term * terms_ratio(n, w)
            n += 1.0
            if abs(nxt) < 1e-17 * abs(acc):
                break
            if not np.isfinite(nxt) or n > floor + n_terms:
                raise ConvergenceError(
                    f"hypergeometric series did not converge at w={w!r} "
                    f"(|zw|={abs(z * w):g})"
                )
            term = nxt
        return acc

    h_z = sol.normalizer  # = H(z)/t_floor prefactor, consistent by anchoring

    def fn(w):
        wr = float(np.real(w))
        if abs(np.imag(np.asarray(w))) > 1e-12:
            raise DomainError("hypergeometric pgf evaluation is real-only")
        if wr == 1.0:
            return 1.0
        return wr ** floor * h_series(wr) / h_z

    def coeffs_fn(n_max):
        out = np.zeros(n_max + 1)
        term = 1.0 / h_z
        n = floor
        while n <= n_max:
            out[n] = term
            term *= terms_ratio(float(n), 1.0)
            n += 1
        return out

    return Pgf(kind="closed_form", fn=fn, coeffs_fn=coeffs_fn,
               label=f"hypergeometric-psd(z={z:g})")


# ---------------------------------------------------------------------------
# event-driven simulation


@dataclass(frozen=True)
class TrajectoryStats:
    """Time-weighted occupancy of a simulated birth-death trajectory."""

    states: np.ndarray        # floor .. n_cap
    occupancy: np.ndarray     # time spent per state after burn-in
    probability: np.ndarray   # occupancy / total recorded time
    total_time: float
    n_events: int
    up_counts: np.ndarray     # transitions j -> j+1 per state index
    down_counts: np.ndarray   # transitions j -> j-1 per state index
    cap_fraction: float
    burn_in: float
    seed: int
    replicas: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("state,occupancy_time,probability\n")
        for s, occ, p in zip(self.states, self.occupancy, self.probability):
            buf.write(f"{int(s)},{occ:.17g},{p:.17g}\n")
        return buf.getvalue()

    def tv_distance(self, table: PmfTable) -> float:
        """Total variation against an analytic table (tail mass lumped)."""
        n = len(self.probability)
        ref = np.zeros(n)
        m = min(n, len(table.probs) - int(self.states[0]))
        lo = int(self.states[0])
        ref[:m] = table.probs[lo:lo + m]
        extra = max(1.0 - ref.sum(), 0.0)
        emp_extra = max(1.0 - self.probability.sum(), 0.0)
        return 0.5 * (np.abs(self.probability - ref).sum()
                      + abs(emp_extra - extra))


def _default_cap(model: BdModel, floor: int) -> int:
    try:
        sol = stationary_solve(model, 4096)
        c = np.cumsum(sol.pmf.probs)
        q999 = int(np.searchsorted(c, 0.999))
        return max(10 * max(q999, 1), floor + 20)
    except (DivergenceError, RateError, ConvergenceError):
        return 10_000


def simulate_ctmc(model: BdModel, t_end: float, seed: int,
                  initial: Optional[int] = None, *,
                  burn_in: Optional[float] = None,
                  n_cap: Optional[int] = None,
                  cap_alarm: float = 1e-6,
                  replicas: int = 1) -> TrajectoryStats:
    """Exact event-driven simulation of the birth-death chain.

    State j waits Exp(lambda_j + mu_j), then moves up with probability
    lambda_j/(lambda_j + mu_j).  The boundary at n_cap reflects (birth
    suppressed); spending more than ``cap_alarm`` of the time there raises
    ExplosionError.  The histogram is time-weighted over [burn_in, t_end].
    Replicas run on independently seeded counter-based streams and merge by
    addition.
    """
    from .sampling import rng_stream

    gnum, gden = model.g_polynomials()
    floor = _effective_floor(gnum, gden, model.floor, 4096)
    if burn_in is None:
        burn_in = 0.01 * t_end
    if n_cap is None:
        n_cap = _default_cap(model, floor)
    states = np.arange(floor, n_cap + 1)
    lam = np.maximum(model.birth_rate(states.astype(float)), 0.0)
    mu = np.maximum(model.death_rate(states.astype(float)), 0.0)
    mu[0] = 0.0        # floor reflects
    lam[-1] = 0.0      # cap reflects
    tot = lam + mu
    if np.any(tot[:-1] <= 0.0):
        raise RateError("chain freezes below the cap; nothing to simulate")
    p_up = np.divide(lam, tot, out=np.zeros_like(lam), where=tot > 0)
    inv_tot = np.divide(1.0, tot, out=np.full_like(tot, np.inf),
                        where=tot > 0)

    if initial is None:
        initial = floor
    if not floor <= initial <= n_cap:
        raise DomainError(f"initial state {initial} outside [{floor}, {n_cap}]")

    occupancy = np.zeros(len(states))
    up_counts = np.zeros(len(states), dtype=np.int64)
    down_counts = np.zeros(len(states), dtype=np.int64)
    n_events = 0
    recorded = 0.0

    block = 1 << 16
    for rep in range(replicas):
        rng = rng_stream(seed, rep)
        t = 0.0
        s = initial - floor
        exp_buf = rng.standard_exponential(block)
        uni_buf = rng.random(block)
        i = block
        while t < t_end:
            if i >= block:
                exp_buf = rng.standard_exponential(block)
                uni_buf = rng.random(block)
                i = 0
            dt = exp_buf[i] * inv_tot[s]
            t_next = t + dt
            if t_next > t_end:
                hold = t_end - t
                if t >= burn_in:
                    occupancy[s] += hold
                    recorded += hold
                elif t_end > burn_in:
                    occupancy[s] += t_end - burn_in
                    recorded += t_end - burn_in
                break
            if t >= burn_in:
                occupancy[s] += dt
                recorded += dt
            elif t_next > burn_in:
                occupancy[s] += t_next - burn_in
                recorded += t_next - burn_in
            if uni_buf[i] < p_up[s]:
                up_counts[s] += 1
                s += 1
            else:
                down_counts[s] += 1
                s -= 1
            t = t_next
            i += 1
            n_events += 1

    cap_fraction = occupancy[-1] / recorded if recorded > 0 else 0.0
    if cap_fraction > cap_alarm:
        raise ExplosionError(
            f"trajectory spent fraction {cap_fraction:.2e} of the time at "
            f"the cap {n_cap} (alarm at {cap_alarm:g}); raise n_cap"
        )
    prob = occupancy / recorded if recorded > 0 else occupancy
    return TrajectoryStats(states=states, occupancy=occupancy,
                           probability=prob, total_time=recorded,
                           n_events=n_events, up_counts=up_counts,
                           down_counts=down_counts,
                           cap_fraction=cap_fraction, burn_in=burn_in,
                           seed=seed, replicas=replicas)


def stationary_for_spec(spec_or_name, n_max: int = 60, **params):
    """Convenience: stationary_solve(amplitudes_for(spec))."""
    spec = (spec_or_name if isinstance(spec_or_name, DistributionSpec)
            else make_spec(spec_or_name, **params))
    return stationary_solve(amplitudes_for(spec), n_max)


def reference_table(spec: DistributionSpec, n_max: int) -> PmfTable:
    """Analytic pmf for comparison against simulation histograms."""
    return pmf_table(spec, n_max)
