"""Probability laws for branching processes.

Offspring laws (integer-valued, possibly infinite-mean) carry a probability
generating function, pmf, generalized-inverse quantile and a sampler.
Lifetime laws (non-negative real) carry a CDF, generalized inverse and
sampler.  Thinning operations produce improper (sub-probability) lifetime
laws whose defect mass stands for "never transmits", i.e. a lifetime of
+infinity.

All laws are treated as immutable after construction and are safe to share
across threads; random state is always caller-owned.
"""
from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.special import gammaln

__all__ = [
    "UnsupportedLawOperation",
    "OffspringLaw",
    "HeavyTailOffspring",
    "LogCorrectedOffspring",
    "FiniteSupportOffspring",
    "PlumpReport",
    "check_plump",
    "LifetimeLaw",
    "ExponentialLifetime",
    "ExpFlatLifetime",
    "DoubleExpFlatLifetime",
    "UniformLifetime",
    "DeterministicLifetime",
    "TableLifetime",
    "ImproperLifetime",
    "truncate_to_one",
    "thin_by_contagion",
    "thin_by_incubation",
    "effective_pgf",
    "effective_pgf_fn",
]


class UnsupportedLawOperation(NotImplementedError):
    """The requested operation is not defined for this law."""


class QuantileOverflowError(OverflowError):
    """Quantile argument too extreme for a law without an analytic tail."""


# ---------------------------------------------------------------------------
# offspring laws


class OffspringLaw:
    """Common interface for integer offspring laws."""

    def pgf(self, s):
        raise NotImplementedError

    def pmf(self, n: int) -> float:
        raise NotImplementedError

    def log_sf(self, k) -> float:
        """log P(D > k)."""
        raise NotImplementedError

    def sf(self, k) -> float:
        return math.exp(self.log_sf(k))

    def quantile(self, u: float) -> int:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator) -> int:
        return self.quantile(float(rng.random()))


@dataclass(eq=True)
class HeavyTailOffspring(OffspringLaw):
    """Offspring law with pgf 1 - (1-s)**alpha, alpha in (0,1).

    Support starts at 1 (no childless individuals), the tail decays like
    k**(-alpha) so the mean is infinite.  pmf and survival function are
    evaluated in log space; far-tail quantities use a two-term asymptotic
    expansion of the gamma-function ratio.
    """

    alpha: float

    _TABLE_SIZE = 4096
    _ASYMPTOTIC_FROM = 1e8

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0,1), got {self.alpha}")

    def pgf(self, s):
        s = np.asarray(s)  # dtype-preserving: extended precision flows through
        if np.any((s < 0.0) | (s > 1.0)):
            raise ValueError("pgf argument must lie in [0,1]")
        out = 1.0 - (1.0 - s) ** self.alpha
        return float(out) if out.ndim == 0 else out

    def pmf(self, n: int) -> float:
        if n < 0:
            raise ValueError("pmf index must be non-negative")
        if n == 0:
            return 0.0
        a = self.alpha
        return math.exp(
            math.log(a) - gammaln(1.0 - a) + gammaln(n - a) - gammaln(n + 1.0)
        )

    def log_sf(self, k) -> float:
        """log P(D > k); exact via log-gamma, asymptotic far out."""
        if k < 1:
            return 0.0
        a = self.alpha
        if k <= self._ASYMPTOTIC_FROM:
            return float(gammaln(k + 1.0 - a) - gammaln(k + 1.0) - gammaln(1.0 - a))
        z = float(k) + 1.0
        return -a * math.log(z) + math.log1p(a * (a + 1.0) / (2.0 * z)) - float(
            gammaln(1.0 - a)
        )

    def sf_inverse_neglog(self, w: float) -> float:
        """Smallest (real) k with P(D > k) <= exp(-w), via the tail asymptotic."""
        a = self.alpha
        logz = (w - float(gammaln(1.0 - a))) / a
        if logz > 700.0:
            # beyond float range; return +inf, caller works in logs
            return math.inf
        z = math.exp(logz)
        z *= math.exp(math.log1p(a * (a + 1.0) / (2.0 * z)) / a)
        return z - 1.0

    @cached_property
    def _cum_table(self) -> np.ndarray:
        n = np.arange(1, self._TABLE_SIZE + 1, dtype=float)
        a = self.alpha
        logp = math.log(a) - gammaln(1.0 - a) + gammaln(n - a) - gammaln(n + 1.0)
        return np.cumsum(np.exp(logp))

    @cached_property
    def _cum_list(self) -> list[float]:
        return self._cum_table.tolist()

    def cdf(self, k: int) -> float:
        if k < 1:
            return 0.0
        if k <= self._TABLE_SIZE:
            return float(self._cum_table[int(k) - 1])
        return -math.expm1(self.log_sf(k))

    def quantile(self, u: float) -> int:
        """min{k : F(k) >= u}; u = 0 maps to the smallest support point."""
        if not 0.0 <= u < 1.0:
            raise ValueError("quantile argument must lie in [0,1)")
        if u <= 0.0:
            return 1
        table = self._cum_table
        if u <= table[-1]:
            return int(np.searchsorted(table, u, side="left")) + 1
        target = math.log1p(-u)  # want log_sf(k) <= target
        lo = self._TABLE_SIZE
        hi = 2 * lo
        while self.log_sf(hi) > target:
            lo = hi
            hi *= 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.log_sf(mid) > target:
                lo = mid
            else:
                hi = mid
        return hi

    def quantile_fast(self, u: float) -> int:
        """Sampling-grade quantile: exact within the cached table, asymptotic
        inversion in the far tail (boundary cells may shift by one)."""
        cum = self._cum_list
        if u <= cum[-1]:
            return bisect_left(cum, u) + 1
        return int(self.sf_inverse_neglog(-math.log1p(-u))) + 1

    def sample(self, rng: np.random.Generator) -> int:
        return self.quantile_fast(float(rng.random()))

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Vectorized sampler (table + asymptotic tail)."""
        u = rng.random(size)
        table = self._cum_table
        out = np.searchsorted(table, u, side="left") + 1
        tail = u > table[-1]
        if np.any(tail):
            a = self.alpha
            w = -np.log1p(-u[tail])
            logz = (w - float(gammaln(1.0 - a))) / a
            z = np.exp(np.minimum(logz, 700.0))
            z *= np.exp(np.log1p(a * (a + 1.0) / (2.0 * z)) / a)
            out = out.astype(float)
            out[tail] = np.floor(z - 1.0) + 1.0
        return out


@dataclass(eq=True)
class LogCorrectedOffspring(OffspringLaw):
    """Offspring law with pgf 1 - (1-s)**alpha * (log(1/(1-s)))**beta.

    The log factor is the concrete slowly-varying correction; the formula is
    the defining object of this family near s = 1 and is evaluated literally
    (clamped to [0,1]).  It is a valid pgf only for s above roughly
    1 - exp(-beta/alpha); there is no closed pmf, so pmf/quantile/sampling
    are unsupported.  Tail-based operations use the implied regularly
    varying tail k**(-alpha) * (log k)**beta / Gamma(1-alpha).
    """

    alpha: float
    beta: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0,1), got {self.alpha}")

    def pgf(self, s):
        s = np.asarray(s)  # dtype-preserving
        if np.any((s < 0.0) | (s > 1.0)):
            raise ValueError("pgf argument must lie in [0,1]")
        z = np.asarray(1.0 - s)
        with np.errstate(divide="ignore", invalid="ignore"):
            corr = np.where(z > 0.0, np.power(-np.log(np.maximum(z, 1e-300)), self.beta), 1.0)
            out = 1.0 - np.power(z, self.alpha) * corr
        out = np.where(z <= 0.0, np.ones_like(out), out)
        out = np.clip(out, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def valid_from(self) -> float:
        """Smallest s at which the literal formula is monotone/convex."""
        if self.beta <= 0.0:
            return 0.0
        return 1.0 - math.exp(-self.beta / self.alpha) * 0.5

    def log_sf(self, k) -> float:
        if k < 3:
            return 0.0
        a, b = self.alpha, self.beta
        lk = math.log(float(k))
        return min(0.0, -a * lk + b * math.log(lk) - float(gammaln(1.0 - a)))

    def pmf(self, n: int) -> float:
        raise UnsupportedLawOperation("log-corrected family has no closed pmf")

    def quantile(self, u: float) -> int:
        raise UnsupportedLawOperation("log-corrected family has no closed pmf")


@dataclass(eq=True)
class FiniteSupportOffspring(OffspringLaw):
    """Offspring law with an explicit finite pmf [(k, p), ...]."""

    points: tuple[tuple[int, float], ...]

    def __init__(self, points: Sequence[tuple[int, float]]):
        pts = tuple(sorted((int(k), float(p)) for k, p in points))
        if any(k < 0 for k, _ in pts):
            raise ValueError("support points must be non-negative integers")
        if any(p < 0.0 for _, p in pts):
            raise ValueError("probabilities must be non-negative")
        total = sum(p for _, p in pts)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"pmf must sum to 1 within 1e-12, got {total!r}")
        object.__setattr__(self, "points", pts)

    @cached_property
    def _ks(self) -> list[int]:
        return [k for k, _ in self.points]

    @cached_property
    def _cum(self) -> list[float]:
        return np.cumsum([p for _, p in self.points]).tolist()

    def pgf(self, s):
        s = np.asarray(s)  # dtype-preserving
        if np.any((s < 0.0) | (s > 1.0)):
            raise ValueError("pgf argument must lie in [0,1]")
        out = sum(p * np.power(s, k) for k, p in self.points)
        out = np.asarray(out)
        return float(out) if out.ndim == 0 else out

    def pmf(self, n: int) -> float:
        for k, p in self.points:
            if k == n:
                return p
        return 0.0

    def log_sf(self, k) -> float:
        tail = sum(p for kk, p in self.points if kk > k)
        return math.log(tail) if tail > 0.0 else -math.inf

    def quantile(self, u: float) -> int:
        if not 0.0 <= u < 1.0:
            raise ValueError("quantile argument must lie in [0,1)")
        if u <= 0.0:
            return self._ks[0] if self.points[0][1] > 0 else self._ks[
                next(i for i, (_, p) in enumerate(self.points) if p > 0)
            ]
        idx = bisect_left(self._cum, u)
        return self._ks[min(idx, len(self._ks) - 1)]

    quantile_fast = quantile

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size)
        idx = np.searchsorted(np.asarray(self._cum), u, side="left")
        ks = np.asarray(self._ks)
        return ks[np.minimum(idx, len(ks) - 1)]


@dataclass(frozen=True)
class PlumpReport:
    """Outcome of the heavy-lower-tail (plumpness) search.

    Verification covers only the tested range [m0, checked_up_to]; a
    positive result is evidence on that range, not a proof beyond it.
    """

    is_plump: bool
    epsilon: float | None
    m0: int | None
    checked_up_to: int


def check_plump(law: OffspringLaw, m_max: int = 10**6, grid_size: int = 200) -> PlumpReport:
    """Search for (epsilon, m0) with P(D >= m**(1+epsilon)) >= 1/m on a
    geometric grid of m in [m0, m_max]; epsilon scans {1, 1/2, ..., 2**-10}.

    Returns the witness with the smallest m0.  Finite-support laws can never
    satisfy the inequality for large m and report is_plump=False directly.
    """
    if isinstance(law, FiniteSupportOffspring):
        return PlumpReport(False, None, None, m_max)
    ms = np.unique(np.geomspace(2, m_max, grid_size).astype(np.int64))
    best: tuple[int, float] | None = None
    for j in range(0, 11):
        eps = 2.0**-j
        ok = np.array(
            [law.log_sf(math.ceil(m ** (1.0 + eps)) - 1) >= -math.log(m) for m in ms]
        )
        bad = np.nonzero(~ok)[0]
        start = int(bad[-1]) + 1 if bad.size else 0
        if start < len(ms):
            m0 = int(ms[start])
            if best is None or m0 < best[0]:
                best = (m0, eps)
    if best is None:
        return PlumpReport(False, None, None, m_max)
    return PlumpReport(True, best[1], best[0], m_max)


# ---------------------------------------------------------------------------
# lifetime laws

_NEG_LOG_099 = -math.log(0.99)
_LOG_1_1 = math.log(1.1)


class LifetimeLaw:
    """Common interface for non-negative lifetime/period laws.

    ``cdf``/``inv_cdf`` are vectorized; ``inv_scalar`` is the scalar fast
    path used by the event-driven simulator.  ``inv_cdf_neglog(w)`` returns
    the generalized inverse at u = exp(-w) and stays meaningful for w far
    beyond float underflow, which the min-summability machinery relies on.
    """

    def cdf(self, t):
        raise NotImplementedError

    def inv_cdf(self, u):
        raise NotImplementedError

    def inv_scalar(self, u: float) -> float:
        return float(self.inv_cdf(u))

    def cdf_scalar(self, t: float) -> float:
        return float(self.cdf(t))

    def neglog_cdf(self, t):
        with np.errstate(divide="ignore"):
            out = -np.log(self.cdf(t))
        return out

    def inv_cdf_neglog(self, w):
        """Generalized inverse at u = exp(-w) (w >= 0, possibly huge)."""
        w = np.asarray(w, dtype=float)
        u = np.exp(-np.minimum(w, 745.0))
        out = self.inv_cdf(u)
        return float(out) if np.ndim(out) == 0 else out

    def sample(self, rng: np.random.Generator) -> float:
        return float(self.inv_cdf(float(rng.random())))

    def sample_py(self, pyrng) -> float:
        """Sampler driven by a stdlib ``random.Random`` (simulation hot path)."""
        return self.inv_scalar(pyrng.random())

    def median(self) -> float:
        return float(self.inv_cdf(0.5))

    def cdf_values(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.cdf(points), dtype=float)


def _as_float_array(x):
    return np.asarray(x, dtype=float)


@dataclass(eq=True)
class ExponentialLifetime(LifetimeLaw):
    """Exponential law with the given rate."""

    rate: float

    def __post_init__(self):
        if self.rate <= 0.0:
            raise ValueError("rate must be positive")

    def cdf(self, t):
        t = _as_float_array(t)
        out = np.where(t > 0.0, -np.expm1(-self.rate * np.maximum(t, 0.0)), 0.0)
        return float(out) if out.ndim == 0 else out

    def inv_cdf(self, u):
        u = _as_float_array(u)
        _check_u(u)
        out = -np.log1p(-u) / self.rate
        return float(out) if out.ndim == 0 else out

    def inv_scalar(self, u: float) -> float:
        return -math.log1p(-u) / self.rate

    def cdf_scalar(self, t: float) -> float:
        return -math.expm1(-self.rate * t) if t > 0.0 else 0.0

    def inv_cdf_neglog(self, w):
        w = _as_float_array(w)
        small = np.exp(-np.minimum(w, 745.0))
        out = np.where(w > 36.0, small / self.rate, -np.log1p(-small) / self.rate)
        return float(out) if out.ndim == 0 else out


@dataclass(eq=True)
class ExpFlatLifetime(LifetimeLaw):
    """CDF exp(-scale/t**power) for small t, the flattest of the classically
    explosive family.  The analytic branch is cut at t0 where the CDF reaches
    0.99 and extended linearly to 1 on [t0, t0+1]; explosiveness depends only
    on the behaviour near 0, so the extension is immaterial for verdicts.
    """

    scale: float  # ell
    power: float  # beta

    def __post_init__(self):
        if self.scale <= 0.0 or self.power <= 0.0:
            raise ValueError("scale and power must be positive")

    @cached_property
    def t0(self) -> float:
        return (self.scale / _NEG_LOG_099) ** (1.0 / self.power)

    def cdf(self, t):
        t = _as_float_array(t)
        t0 = self.t0
        with np.errstate(divide="ignore", over="ignore"):
            core = np.exp(-self.scale / np.maximum(t, 1e-300) ** self.power)
        lin = 0.99 + 0.01 * (t - t0)
        out = np.where(t <= 0.0, 0.0, np.where(t <= t0, core, np.minimum(lin, 1.0)))
        return float(out) if out.ndim == 0 else out

    def cdf_scalar(self, t: float) -> float:
        if t <= 0.0:
            return 0.0
        if t <= self.t0:
            return math.exp(-self.scale / t**self.power)
        return min(1.0, 0.99 + 0.01 * (t - self.t0))

    def neglog_cdf(self, t):
        t = _as_float_array(t)
        core = self.scale / np.maximum(t, 1e-300) ** self.power
        with np.errstate(divide="ignore"):
            out = np.where(t <= self.t0, core, -np.log(np.asarray(self.cdf(t))))
        return float(out) if out.ndim == 0 else out

    def inv_cdf(self, u):
        u = _as_float_array(u)
        _check_u(u)
        with np.errstate(divide="ignore"):
            core = (self.scale / np.maximum(-np.log(u), _NEG_LOG_099)) ** (
                1.0 / self.power
            )
        lin = self.t0 + (u - 0.99) / 0.01
        out = np.where(u <= 0.0, 0.0, np.where(u <= 0.99, core, lin))
        return float(out) if out.ndim == 0 else out

    def inv_scalar(self, u: float) -> float:
        if u <= 0.0:
            return 0.0
        if u <= 0.99:
            return (self.scale / -math.log(u)) ** (1.0 / self.power)
        return self.t0 + (u - 0.99) / 0.01

    def inv_cdf_neglog(self, w):
        w = _as_float_array(w)
        out = (self.scale / np.maximum(w, _NEG_LOG_099)) ** (1.0 / self.power)
        small = w < _NEG_LOG_099  # u > 0.99: linear segment
        if np.any(small):
            out = np.where(small, self.inv_cdf(np.exp(-w)), out)
        return float(out) if out.ndim == 0 else out


@dataclass(eq=True)
class DoubleExpFlatLifetime(LifetimeLaw):
    """CDF exp(-exp(scale/t**power)) for small t; so flat at 0 that the
    explosiveness verdict flips at power = 1.  The analytic branch tops out
    below exp(-1); it is cut where the inner exponent reaches log(1.1) and
    extended linearly to 1 over one unit, same scheme as ExpFlatLifetime.
    """

    scale: float  # k
    power: float  # gamma

    def __post_init__(self):
        if self.scale <= 0.0 or self.power <= 0.0:
            raise ValueError("scale and power must be positive")

    @cached_property
    def t0(self) -> float:
        return (self.scale / _LOG_1_1) ** (1.0 / self.power)

    @cached_property
    def _g_t0(self) -> float:
        return math.exp(-math.exp(self.scale / self.t0**self.power))

    def cdf(self, t):
        t = _as_float_array(t)
        t0 = self.t0
        with np.errstate(divide="ignore", over="ignore"):
            core = np.exp(-np.exp(self.scale / np.maximum(t, 1e-300) ** self.power))
        lin = self._g_t0 + (1.0 - self._g_t0) * (t - t0)
        out = np.where(t <= 0.0, 0.0, np.where(t <= t0, core, np.minimum(lin, 1.0)))
        return float(out) if out.ndim == 0 else out

    def cdf_scalar(self, t: float) -> float:
        if t <= 0.0:
            return 0.0
        if t <= self.t0:
            x = self.scale / t**self.power
            return math.exp(-math.exp(x)) if x < 700.0 else 0.0
        return min(1.0, self._g_t0 + (1.0 - self._g_t0) * (t - self.t0))

    def neglog_cdf(self, t):
        t = _as_float_array(t)
        with np.errstate(over="ignore", divide="ignore"):
            core = np.exp(self.scale / np.maximum(t, 1e-300) ** self.power)
            out = np.where(t <= self.t0, core, -np.log(np.asarray(self.cdf(t))))
        return float(out) if out.ndim == 0 else out

    def inv_cdf(self, u):
        u = _as_float_array(u)
        _check_u(u)
        with np.errstate(divide="ignore", invalid="ignore"):
            loglog = np.log(np.maximum(-np.log(np.maximum(u, 1e-300)), _LOG_1_1))
            core = (self.scale / np.maximum(loglog, 1e-300)) ** (1.0 / self.power)
        lin = self.t0 + (u - self._g_t0) / (1.0 - self._g_t0)
        out = np.where(u <= 0.0, 0.0, np.where(u <= self._g_t0, core, lin))
        return float(out) if out.ndim == 0 else out

    def inv_scalar(self, u: float) -> float:
        if u <= 0.0:
            return 0.0
        if u <= self._g_t0:
            return (self.scale / math.log(-math.log(u))) ** (1.0 / self.power)
        return self.t0 + (u - self._g_t0) / (1.0 - self._g_t0)

    def inv_cdf_neglog(self, w):
        w = _as_float_array(w)
        with np.errstate(divide="ignore"):
            core = (self.scale / np.maximum(np.log(np.maximum(w, 1.0)), _LOG_1_1)) ** (
                1.0 / self.power
            )
        small = w < 1.1  # u above the analytic branch
        if np.any(small):
            core = np.where(small, self.inv_cdf(np.exp(-w)), core)
        return float(core) if core.ndim == 0 else core


@dataclass(eq=True)
class UniformLifetime(LifetimeLaw):
    """Uniform law on [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        if self.lo < 0.0 or self.hi <= self.lo:
            raise ValueError("need 0 <= lo < hi")

    def cdf(self, t):
        t = _as_float_array(t)
        out = np.clip((t - self.lo) / (self.hi - self.lo), 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def cdf_scalar(self, t: float) -> float:
        return min(1.0, max(0.0, (t - self.lo) / (self.hi - self.lo)))

    def inv_cdf(self, u):
        u = _as_float_array(u)
        _check_u(u)
        out = np.where(u <= 0.0, 0.0, self.lo + u * (self.hi - self.lo))
        return float(out) if out.ndim == 0 else out

    def inv_scalar(self, u: float) -> float:
        return 0.0 if u <= 0.0 else self.lo + u * (self.hi - self.lo)

    def inv_cdf_neglog(self, w):
        w = _as_float_array(w)
        out = self.lo + np.exp(-np.minimum(w, 745.0)) * (self.hi - self.lo)
        return float(out) if out.ndim == 0 else out


@dataclass(eq=True)
class DeterministicLifetime(LifetimeLaw):
    """Point mass at ``value``.  Sampling consumes no randomness, which keeps
    random streams aligned between process variants that only differ by a
    degenerate period law."""

    value: float

    def __post_init__(self):
        if self.value < 0.0:
            raise ValueError("value must be non-negative")

    def cdf(self, t):
        t = _as_float_array(t)
        out = np.where(t >= self.value, 1.0, 0.0)
        return float(out) if out.ndim == 0 else out

    def cdf_scalar(self, t: float) -> float:
        return 1.0 if t >= self.value else 0.0

    def inv_cdf(self, u):
        u = _as_float_array(u)
        _check_u(u)
        out = np.where(u <= 0.0, 0.0, self.value)
        return float(out) if out.ndim == 0 else out

    def inv_scalar(self, u: float) -> float:
        return 0.0 if u <= 0.0 else self.value

    def inv_cdf_neglog(self, w):
        w = _as_float_array(w)
        out = np.full_like(w, self.value)
        return float(out) if out.ndim == 0 else out

    def sample(self, rng: np.random.Generator) -> float:
        return self.value

    def sample_py(self, pyrng) -> float:
        return self.value


def _table_inverse(values: np.ndarray, ts: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Generalized inverse of a tabulated non-decreasing CDF with linear
    interpolation between knots."""
    idx = np.searchsorted(values, u, side="left")
    idx = np.clip(idx, 1, len(values) - 1)
    v0 = values[idx - 1]
    v1 = values[idx]
    t0 = ts[idx - 1]
    t1 = ts[idx]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(v1 > v0, (u - v0) / (v1 - v0), 0.0)
    out = t0 + np.clip(frac, 0.0, 1.0) * (t1 - t0)
    out = np.where(u <= values[0], np.where(u <= 0.0, 0.0, ts[0]), out)
    return out


@dataclass(eq=False)
class TableLifetime(LifetimeLaw):
    """CDF tabulated on sorted knots, linearly interpolated.

    An optional aligned ``neglog`` table (-log F at the same knots) keeps the
    left tail meaningful far below float underflow of F itself; it is what
    power-transformed laws are built from.
    """

    def __init__(self, knots: Sequence[tuple[float, float]], neglog: Sequence[float] | None = None):
        ts = np.asarray([t for t, _ in knots], dtype=float)
        fs = np.asarray([f for _, f in knots], dtype=float)
        if ts.ndim != 1 or len(ts) < 2:
            raise ValueError("need at least two knots")
        if np.any(np.diff(ts) <= 0.0):
            raise ValueError("knot times must be strictly increasing")
        if np.any(np.diff(fs) < 0.0) or fs[0] < 0.0 or fs[-1] > 1.0 + 1e-12:
            raise ValueError("CDF values must be non-decreasing within [0,1]")
        if abs(fs[-1] - 1.0) > 1e-9:
            raise ValueError("table must reach 1 at the last knot")
        fs[-1] = 1.0
        self.ts = ts
        self.fs = fs
        self.neglog = None if neglog is None else np.asarray(neglog, dtype=float)
        if self.neglog is not None and len(self.neglog) != len(ts):
            raise ValueError("neglog table must align with the knots")

    def __eq__(self, other):
        return (
            isinstance(other, TableLifetime)
            and np.array_equal(self.ts, other.ts)
            and np.array_equal(self.fs, other.fs)
        )

    def cdf(self, t):
        t = _as_float_array(t)
        out = np.interp(t, self.ts, self.fs, left=0.0, right=1.0)
        return float(out) if out.ndim == 0 else out

    def neglog_cdf(self, t):
        if self.neglog is None:
            return super().neglog_cdf(t)
        t = _as_float_array(t)
        out = np.interp(t, self.ts, self.neglog, left=np.inf, right=self.neglog[-1])
        return float(out) if out.ndim == 0 else out

    def inv_cdf(self, u):
        u = _as_float_array(u)
        _check_u(u)
        out = _table_inverse(self.fs, self.ts, np.atleast_1d(u))
        return float(out[0]) if u.ndim == 0 else out

    def inv_cdf_neglog(self, w):
        if self.neglog is None:
            return super().inv_cdf_neglog(w)
        w = _as_float_array(w)
        wa = np.atleast_1d(w)
        # neglog is non-increasing in t: invert on the reversed table
        rev_w = self.neglog[::-1]
        rev_t = self.ts[::-1]
        idx = np.searchsorted(-rev_w, -wa, side="left")
        idx = np.clip(idx, 1, len(rev_w) - 1)
        w0, w1 = rev_w[idx - 1], rev_w[idx]
        t0, t1 = rev_t[idx - 1], rev_t[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(w1 != w0, (wa - w0) / (w1 - w0), 0.0)
        out = t0 + np.clip(frac, 0.0, 1.0) * (t1 - t0)
        out = np.where(wa >= self.neglog[0], self.ts[0] * np.ones_like(wa), out)
        out = np.where(wa <= self.neglog[-1], self.ts[-1] * np.ones_like(wa), out)
        return float(out[0]) if w.ndim == 0 else out


@dataclass(eq=False)
class ImproperLifetime(LifetimeLaw):
    """Sub-probability lifetime law: CDF tabulated up to ``total_mass`` < 1,
    the defect being an atom at +infinity ("never transmits").

    Values are held in extended precision so extremely flat laws keep their
    mass near the origin (the fixed-point solvers depend on it); interp-based
    lookups work on a float64 view.  ``tail_bound`` bounds the mass the
    truncation horizon may have missed; it is reported, never silently
    folded in.
    """

    def __init__(self, ts: np.ndarray, values: np.ndarray, tail_bound: float):
        ts = np.asarray(ts, dtype=float)
        values = np.asarray(values, dtype=np.longdouble)
        if len(ts) != len(values) or len(ts) < 2:
            raise ValueError("need aligned tables with at least two knots")
        if np.any(np.diff(values) < -1e-15):
            raise ValueError("CDF values must be non-decreasing")
        self.ts = ts
        self.values = np.maximum.accumulate(values)
        self._values_f64 = self.values.astype(float)
        self.tail_bound = float(tail_bound)

    @property
    def total_mass(self) -> float:
        return float(self.values[-1])

    def __eq__(self, other):
        return (
            isinstance(other, ImproperLifetime)
            and np.array_equal(self.ts, other.ts)
            and np.array_equal(self.values, other.values)
        )

    def cdf(self, t):
        t = _as_float_array(t)
        out = np.interp(t, self.ts, self._values_f64, left=0.0, right=self.total_mass)
        return float(out) if out.ndim == 0 else out

    def cdf_values(self, points: np.ndarray) -> np.ndarray:
        if len(points) == len(self.ts) and np.array_equal(points, self.ts):
            return self.values.copy()
        return super().cdf_values(points)

    def cdf_scalar(self, t: float) -> float:
        return float(np.interp(t, self.ts, self._values_f64))

    @cached_property
    def _values_list(self) -> list[float]:
        return self._values_f64.tolist()

    def inv_cdf(self, u):
        u = _as_float_array(u)
        _check_u(u)
        ua = np.atleast_1d(u)
        out = _table_inverse(self.values, self.ts, ua)
        out = np.where(ua >= self.total_mass, np.inf, out)
        return float(out[0]) if u.ndim == 0 else out

    def inv_scalar(self, u: float) -> float:
        values = self._values_list
        if u >= values[-1]:
            return math.inf
        if u <= 0.0:
            return 0.0
        idx = bisect_left(values, u)
        idx = min(max(idx, 1), len(values) - 1)
        v0, v1 = values[idx - 1], values[idx]
        t0, t1 = self.ts[idx - 1], self.ts[idx]
        frac = (u - v0) / (v1 - v0) if v1 > v0 else 0.0
        return t0 + frac * (t1 - t0)

    def median(self) -> float:
        return self.inv_scalar(0.5)


def _check_u(u):
    if np.any((np.asarray(u) < 0.0) | (np.asarray(u) >= 1.0)):
        raise ValueError("quantile argument must lie in [0,1)")


def truncate_to_one(law: LifetimeLaw, delta: float) -> TableLifetime:
    """Replace ``law`` above delta/2 by a linear climb reaching 1 at delta.

    The result agrees with ``law`` on [0, delta/2] and puts all remaining
    mass below delta; used to normalize incubation laws before the exploding
    path construction.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    half = delta / 2.0
    ts = np.linspace(0.0, half, 257)
    fs = np.asarray(law.cdf(ts), dtype=float)
    ts = np.append(ts, [delta, delta * 1.0000001])
    fs = np.append(fs, [1.0, 1.0])
    fs = np.minimum.accumulate(fs[::-1])[::-1]  # guard float dust
    fs = np.maximum.accumulate(fs)
    return TableLifetime(list(zip(ts, fs)))


# ---------------------------------------------------------------------------
# thinnings and the effective pgf


def _default_horizon(law: LifetimeLaw) -> float:
    med = law.median()
    if not math.isfinite(med) or med <= 0.0:
        return 1.0
    return max(50.0 * med, 1.0)


def _thin(
    lifetime: LifetimeLaw,
    kernel_cdf,
    kernel_at_zero: float,
    grid_points: np.ndarray | None,
    cells: int,
    horizon: float | None,
) -> ImproperLifetime:
    if grid_points is None:
        hor = horizon if horizon is not None else _default_horizon(lifetime)
        pts = np.linspace(0.0, hor, cells + 1)
    else:
        pts = np.asarray(grid_points, dtype=float)
    g = lifetime.cdf_values(pts)
    mids = 0.5 * (pts[:-1] + pts[1:])
    dg = np.diff(g)
    weights = kernel_cdf(mids)
    values = np.empty_like(pts)
    values[0] = g[0] * kernel_at_zero
    values[1:] = values[0] + np.cumsum(weights * dg)
    tail_bound = 1.0 - float(g[-1])
    return ImproperLifetime(pts, values, tail_bound)


def thin_by_contagion(
    lifetime: LifetimeLaw,
    contagious: LifetimeLaw,
    grid_points: np.ndarray | None = None,
    cells: int = 4096,
    horizon: float | None = None,
) -> ImproperLifetime:
    """Sub-CDF of the transmission time when only children with lifetime
    within the parent's contagious period are ever infected:
    integral over (0, x] of (1 - C(u)) dG(u), midpoint rule on G-increments."""
    kernel = lambda m: 1.0 - np.asarray(contagious.cdf(m), dtype=float)
    at_zero = 1.0 - contagious.cdf_scalar(0.0)
    return _thin(lifetime, kernel, at_zero, grid_points, cells, horizon)


def thin_by_incubation(
    lifetime: LifetimeLaw,
    incubation: LifetimeLaw,
    grid_points: np.ndarray | None = None,
    cells: int = 4096,
    horizon: float | None = None,
) -> ImproperLifetime:
    """Sub-CDF when a child transmits only after its own incubation period:
    integral over (0, x] of I(u) dG(u)."""
    kernel = lambda m: np.asarray(incubation.cdf(m), dtype=float)
    at_zero = incubation.cdf_scalar(0.0)
    return _thin(lifetime, kernel, at_zero, grid_points, cells, horizon)


def effective_pgf_fn(
    offspring: OffspringLaw,
    lifetime: LifetimeLaw,
    contagious: LifetimeLaw,
    cells: int = 8192,
    horizon: float | None = None,
):
    """Build s -> integral of h(1 - (1-s) G(x)) dC(x).

    This is the pgf of the per-individual offspring that is eventually born
    in the forward contagious process.  The value at s=1 is exactly 1 by
    construction (the quadrature weights telescope).
    """
    hor = horizon if horizon is not None else _default_horizon(contagious)
    pts = np.linspace(0.0, hor, cells + 1)
    c_vals = np.asarray(contagious.cdf(pts), dtype=float)
    dc = np.diff(c_vals)
    c0 = c_vals[0]
    tail = 1.0 - c_vals[-1]
    mids = 0.5 * (pts[:-1] + pts[1:])
    g_mids = np.asarray(lifetime.cdf(mids), dtype=float)
    g_zero = lifetime.cdf_scalar(0.0)

    def h_eff(s: float) -> float:
        if not 0.0 <= s <= 1.0:
            raise ValueError("pgf argument must lie in [0,1]")
        z = 1.0 - s
        bulk = float(np.dot(dc, offspring.pgf(np.clip(1.0 - z * g_mids, 0.0, 1.0))))
        atom = c0 * float(offspring.pgf(min(1.0, max(0.0, 1.0 - z * g_zero))))
        return atom + bulk + tail * float(offspring.pgf(s))

    return h_eff


def effective_pgf(
    offspring: OffspringLaw,
    lifetime: LifetimeLaw,
    contagious: LifetimeLaw,
    s: float,
    cells: int = 8192,
    horizon: float | None = None,
) -> float:
    """Point evaluation of the effective offspring pgf (see effective_pgf_fn)."""
    return effective_pgf_fn(offspring, lifetime, contagious, cells, horizon)(s)
