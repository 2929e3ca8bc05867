"""Random-variate generation for the catalog families.

Streams are counter-based (Philox) keyed by (seed, stream id), so every
Monte-Carlo figure in the test suite is reproducible bit-exactly per
(seed, replica) pair and replicas can run in parallel without coordination.

The Sibuya-type families use the defining sequential-trial construction:
trial t >= 1 succeeds with probability gamma/(nu+t) and the first success
index is returned.  Past a block horizon the construction is completed by
exact inversion of its conditional survival function, which is the same law
evaluated in closed form rather than trial by trial.  Everything else samples
by inversion on a cached cumulative table, with a fitted power-law tail for
the heavy-tailed members.
"""

from __future__ import annotations

import math
from typing import Dict, Tuple

import numpy as np

from .errors import DomainError, TailModelError, UnsupportedError
from .families import (
    DistributionSpec,
    pmf_table,
    support_floor,
    tail_exponent,
)
from .tailsum import signed_lgamma_sum

__all__ = ["rng_stream", "sample", "sample_thinned", "empirical_pmf"]

_TRIAL_HORIZON = 4096


def rng_stream(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent reproducible generator for (seed, stream)."""
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
                    np.uint64(stream & 0xFFFFFFFFFFFFFFFF)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


# ---------------------------------------------------------------------------
# sequential-trial construction (Sibuya and generalized Sibuya)


def _survival_invert(nu: float, g: float, t0: int,
                     u: np.ndarray) -> np.ndarray:
    """Smallest n > t0 with S(n)/S(t0) <= u, where S is the trial-survival
    function S(n) = Gamma(nu+1+n-g)/Gamma(nu+1+n) up to a constant."""

    def log_s(n):
        return signed_lgamma_sum(np.asarray(n, float) + nu + 1.0,
                                 [-g, 0.0], [1.0, -1.0])

    target = log_s(np.full(u.shape, float(t0))) + np.log(u)
    lo = np.full(u.shape, float(t0))
    hi = np.full(u.shape, float(t0))
    step = np.full(u.shape, 1024.0)
    # expand until log_s(hi) <= target
    for _ in range(80):
        mask = log_s(hi) > target
        if not mask.any():
            break
        hi[mask] += step[mask]
        step[mask] *= 4.0
    for _ in range(64):
        mid = np.floor((lo + hi) / 2.0)
        le = log_s(mid) <= target
        hi[le] = mid[le]
        lo[~le] = np.maximum(mid[~le], lo[~le] + 1.0)
        if np.all(hi - lo <= 1.0):
            break
    return hi.astype(np.int64)


def _sample_trials(nu: float, g: float, count: int,
                   rng: np.random.Generator) -> np.ndarray:
    out = np.zeros(count, dtype=np.int64)
    active = np.arange(count)
    t = 0
    while active.size and t < _TRIAL_HORIZON:
        t += 1
        hit = rng.random(active.size) < g / (nu + t)
        out[active[hit]] = t
        active = active[~hit]
    if active.size:
        out[active] = _survival_invert(nu, g, _TRIAL_HORIZON,
                                       rng.random(active.size))
    return out


# ---------------------------------------------------------------------------
# inversion tables


_table_cache: Dict[DistributionSpec, Tuple[np.ndarray, float, float]] = {}


def _cumulative_table(spec: DistributionSpec):
    """(cumulative, tail_mass, fitted_tail_exponent) for inversion."""
    if spec in _table_cache:
        return _table_cache[spec]
    heavy = tail_exponent(spec) is not None
    target_tail = 1e-6 if heavy else 1e-12
    n = 1 << 12
    while True:
        table = pmf_table(spec, n)
        if table.tail_mass <= target_tail or n >= (1 << 20):
            break
        n *= 2
    probs = table.probs
    tail = float(table.tail_mass)
    fitted = None
    if tail > 0 and heavy:
        lo = max(len(probs) // 10 * 9, support_floor(spec) + 1)
        idx = np.arange(lo, len(probs))
        usable = probs[idx] > 0
        if tail > 1e-3 and usable.sum() < 10:
            raise TailModelError(
                f"cannot fit a tail exponent for {spec}: tail mass {tail:g} "
                f"with {int(usable.sum())} usable points"
            )
        slope = np.polyfit(np.log(idx[usable]), np.log(probs[idx][usable]), 1)[0]
        fitted = -float(slope)
    out = (np.cumsum(probs), tail, fitted)
    _table_cache[spec] = out
    return out


def _sample_inversion(spec: DistributionSpec, count: int,
                      rng: np.random.Generator) -> np.ndarray:
    cum, tail, fitted = _cumulative_table(spec)
    u = rng.random(count)
    out = np.searchsorted(cum, u * (cum[-1] + tail), side="left")
    in_tail = out >= len(cum)
    if in_tail.any():
        if fitted is None or fitted <= 1.0:
            out[in_tail] = len(cum) - 1  # residual lumped at the last state
        else:
            # conditional Pareto continuation beyond the table
            v = rng.random(int(in_tail.sum()))
            n0 = float(len(cum) - 1)
            out[in_tail] = np.floor(
                n0 * v ** (-1.0 / (fitted - 1.0))).astype(np.int64)
    return out.astype(np.int64)


# ---------------------------------------------------------------------------
# public samplers


def sample(spec: DistributionSpec, n: int, seed: int, *,
           stream: int = 0) -> np.ndarray:
    """n i.i.d. variates of the family."""
    if n < 0:
        raise DomainError("sample count must be >= 0")
    rng = rng_stream(seed, stream)
    return _sample_with(spec, n, rng)


def _sample_with(spec: DistributionSpec, n: int,
                 rng: np.random.Generator) -> np.ndarray:
    f = spec.family
    if f == "sibuya":
        return _sample_trials(0.0, spec["gamma"], n, rng)
    if f == "shifted_sibuya":
        return _sample_trials(0.0, spec["gamma"], n, rng) - 1
    if f == "generalized_sibuya":
        return _sample_trials(spec["nu"], spec["gamma"], n, rng)
    if f == "shifted_generalized_sibuya":
        return _sample_trials(spec["nu"], spec["gamma"], n, rng) - 1
    if f == "scaled_sibuya":
        keep = rng.random(n) < spec["lam"]
        out = np.zeros(n, dtype=np.int64)
        if keep.any():
            out[keep] = _sample_trials(0.0, spec["gamma"], int(keep.sum()), rng)
        return out
    if f == "poisson":
        return rng.poisson(spec["lam"], n).astype(np.int64)
    if f == "bernoulli":
        return (rng.random(n) < spec["a"]).astype(np.int64)
    if f == "nbd":
        return rng.negative_binomial(spec["k"], 1.0 - spec["q"], n).astype(np.int64)
    if f == "geometric":
        lam = spec["lam"]
        return rng.negative_binomial(1.0, 1.0 / (1.0 + lam), n).astype(np.int64)
    if f == "discrete_stable":
        counts = rng.poisson(spec["lam"], n)
        return _sibuya_sums(counts, spec["gamma"], rng)
    if f == "mittag_leffler":
        lam = spec["lam"]
        counts = rng.negative_binomial(1.0, 1.0 / (1.0 + lam), n)
        return _sibuya_sums(counts, spec["gamma"], rng)
    if f in ("extended_sibuya", "shifted_extended_sibuya", "logarithmic",
             "zero_inflated_log", "cmp2", "zero_truncated_nbd", "four_param"):
        return _sample_inversion(spec, n, rng)
    raise UnsupportedError(f"no sampler for family {f!r}")  # pragma: no cover


def _sibuya_sums(counts: np.ndarray, gamma: float,
                 rng: np.random.Generator) -> np.ndarray:
    """Sum of `counts[i]` independent Sibuya(gamma) variates per entry."""
    total = int(counts.sum())
    if total == 0:
        return np.zeros(len(counts), dtype=np.int64)
    draws = _sample_trials(0.0, gamma, total, rng)
    owner = np.repeat(np.arange(len(counts)), counts)
    out = np.zeros(len(counts), dtype=np.int64)
    np.add.at(out, owner, draws)
    return out


def sample_thinned(spec: DistributionSpec, a: float, n: int,
                   seed: int, *, stream: int = 0) -> np.ndarray:
    """Definitional binomial thinning: draw X, keep Binomial(X, a) marks.

    Serves as the independent sampling oracle for pgf_thin.
    """
    if not 0.0 < a < 1.0:
        raise DomainError(f"thinning probability a={a!r} outside (0,1)")
    rng = rng_stream(seed, stream)
    x = _sample_with(spec, n, rng)
    return rng.binomial(x, a).astype(np.int64)


def empirical_pmf(samples: np.ndarray, n_max: int):
    """Empirical pmf table over 0..n_max; mass beyond goes to tail_mass."""
    from .gf import PmfTable

    samples = np.asarray(samples)
    counts = np.bincount(np.clip(samples, 0, n_max + 1),
                         minlength=n_max + 2)
    probs = counts[: n_max + 1] / len(samples)
    return PmfTable(probs, tail_mass=counts[n_max + 1] / len(samples),
                    provenance="empirical")
