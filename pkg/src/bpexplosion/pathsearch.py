"""Constructive search for an exploding path in the forward incubation
process.

The algorithm walks down one candidate path.  At each step it requires the
current node to have at least f(n) = m**(1/sqrt(alpha)**n) children, keeps
the W_n alive children with the most children of their own as options, and
descends into the option minimizing conditional-lifetime-plus-incubation.
Failure is declared when too few children survive the incubation rule (or
when the chosen child's family is too small for the next step); otherwise
the accumulated path lengths converge and certify explosiveness.

All counts live in log space once they leave float range; order statistics
of astronomically many uniforms use their Poisson-process limit, and the
minimum over astronomically many options uses the order-statistics shortcut
with a regularly-varying left-tail extrapolation of the value distribution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .laws import HeavyTailOffspring, LifetimeLaw, truncate_to_one
from .process import ForwardIncubationProcess
from .sim import trial_rngs

__all__ = ["PathSearchResult", "exploding_path_search"]

_OPTIONS_CAP = 100_000
_EXACT_COUNT_CAP = 10_000
_BINOM_EXACT_CAP = 10.0**12


@dataclass
class PathSearchResult:
    success: bool
    path_partial_sums: list[float]
    failure_generation: int | None

    @property
    def last_increment(self) -> float:
        sums = self.path_partial_sums
        if len(sums) >= 2:
            return sums[-1] - sums[-2]
        return sums[0] if sums else math.inf

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "path_partial_sums": list(self.path_partial_sums),
            "failure_generation": self.failure_generation,
            "last_increment": self.last_increment,
        }


def _conditional_exceed(law: LifetimeLaw, x0: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """Sample (X | X >= x0): rejection while acceptance is decent, inverse-CDF
    conditioning once it drops below 1%."""
    tail = 1.0 - law.cdf_scalar(x0)
    if tail <= 0.0:
        raise ValueError("conditioning event has probability zero")
    if tail >= 0.01:
        out = np.empty(size)
        filled = 0
        while filled < size:
            need = size - filled
            draws = np.asarray(law.inv_cdf(rng.random(int(need / tail) + 8)))
            good = draws[draws >= x0]
            take = min(len(good), need)
            out[filled : filled + take] = good[:take]
            filled += take
        return out
    lo = law.cdf_scalar(x0)
    return np.asarray(law.inv_cdf(lo + rng.random(size) * (1.0 - lo)))


def _top_order_stat_neglogs(log_count: float, j: int, rng: np.random.Generator) -> np.ndarray:
    """-log(1 - U_(N-i+1)) for the top j of N = exp(log_count) i.i.d.
    uniforms, largest first; uses the Poisson-process limit 1 - U ~ Gamma_i/N
    (exact sampling is only chosen by callers for small N)."""
    gammas = np.cumsum(rng.standard_exponential(j))
    return log_count - np.log(gammas)


def _fit_left_tail_power(cdf_at) -> tuple[float, float]:
    """Fit F(y) ~ C * y**p near 0 from two anchors where F is representable.

    Returns (p, log_C).  Used to extrapolate quantiles of a sum-law far
    below float underflow; valid for CDFs regularly varying at 0.
    """
    y_hi = 1e-2
    f_hi = cdf_at(y_hi)
    tries = 0
    while (f_hi <= 0.0 or f_hi > 0.2) and tries < 60:
        y_hi *= 0.5 if f_hi > 0.2 else 2.0
        f_hi = cdf_at(y_hi)
        tries += 1
    y_lo = y_hi / 8.0
    f_lo = cdf_at(y_lo)
    if f_lo <= 0.0 or f_hi <= 0.0 or f_lo >= f_hi:
        return 1.0, 0.0
    p = math.log(f_hi / f_lo) / math.log(y_hi / y_lo)
    log_c = math.log(f_hi) - p * math.log(y_hi)
    return p, log_c


def exploding_path_search(
    spec: ForwardIncubationProcess,
    delta: float,
    m: float,
    max_gen: int,
    master_seed: int = 0,
    options_cap: int = _OPTIONS_CAP,
) -> PathSearchResult:
    """Run the candidate-exploding-path construction for ``max_gen`` steps.

    Preconditions: heavy-tail offspring with exponent alpha; the incubation
    law is truncated to reach 1 at ``delta`` (built here from the spec's
    law); and m must satisfy (1/8) * c * m**(1 - sqrt(alpha)) >= e with
    c = P(X > delta) / 2, the constant the construction's success bound
    needs.  The root's family size is drawn conditioned on being at least
    f(0) = m (the construction starts from that event).
    """
    if not isinstance(spec, ForwardIncubationProcess):
        raise ValueError("path search applies to the forward incubation process")
    offspring = spec.offspring
    if not isinstance(offspring, HeavyTailOffspring):
        raise ValueError("path search needs a heavy-tail power-law offspring")
    alpha = offspring.alpha
    lifetime = spec.lifetime
    c = 0.5 * (1.0 - lifetime.cdf_scalar(delta))
    if c <= 0.0:
        raise ValueError("delta leaves no lifetime mass above it")
    sqa = math.sqrt(alpha)
    if (c / 8.0) * m ** (1.0 - sqa) < math.e:
        raise ValueError(
            "m too small: need (1/8) * c * m**(1-sqrt(alpha)) >= e, "
            f"got {(c / 8.0) * m ** (1.0 - sqa):.4g}"
        )
    incubation = truncate_to_one(spec.incubation, delta)
    _, rng = trial_rngs(master_seed, 0)

    log_f = [math.log(m) * (1.0 / sqa) ** n for n in range(max_gen + 1)]

    # root family size conditioned on >= f(0)
    f0 = math.ceil(m)
    flo = -math.expm1(offspring.log_sf(f0 - 1))  # F(f0 - 1)
    u = flo + rng.random() * (1.0 - flo)
    d_val = float(offspring.quantile_fast(min(u, 1.0 - 1e-16)))
    log_d = math.log(d_val)

    tau = float(incubation.inv_cdf(rng.random()))
    partial: list[float] = []
    total = 0.0

    for n in range(max_gen):
        if log_d < log_f[n] - 1e-12:
            return PathSearchResult(False, partial, n)
        p_alive = 1.0 - lifetime.cdf_scalar(tau)
        # effective (alive) children under the incubation rule
        if d_val <= _BINOM_EXACT_CAP:
            d_eff = float(rng.binomial(int(d_val), p_alive))
            log_d_eff = math.log(d_eff) if d_eff > 0 else -math.inf
        else:
            log_d_eff = log_d + math.log(p_alive)  # relative noise ~ 1/sqrt(D*p)
            d_eff = math.exp(log_d_eff) if log_d_eff < 700.0 else math.inf
        if log_d_eff < math.log(c) + log_f[n] - 1e-12:
            return PathSearchResult(False, partial, n)
        log_w = math.log(c / 2.0) + (1.0 - sqa) * log_f[n]
        if log_w <= math.log(options_cap):
            w_n = max(1, int(math.exp(log_w)))
            # offspring counts of the alive children; keep the top w_n
            if d_eff <= _EXACT_COUNT_CAP:
                counts = offspring.sample_many(rng, int(d_eff)).astype(float)
                order = np.argsort(counts)[::-1][:w_n]
                opt_log_d = np.log(np.maximum(counts[order], 1.0))
            else:
                neglogs = _top_order_stat_neglogs(log_d_eff, w_n, rng)
                opt_log_d = np.array(
                    [_tail_quantile_log(offspring, w) for w in neglogs]
                )
            k = len(opt_log_d)
            x_cond = _conditional_exceed(lifetime, tau, rng, k)
            incs = np.asarray(incubation.inv_cdf(rng.random(k)))
            pick = int(np.argmin(x_cond + incs))
            total += float(x_cond[pick])
            partial.append(total)
            log_d = float(opt_log_d[pick])
            d_val = math.exp(log_d) if log_d < 700.0 else math.inf
            tau = float(incs[pick])
        else:
            # astronomically many options: shortcut-sample the minimum of
            # (X | X >= tau) + I via the order-statistics trick, split the
            # sum by the limiting Beta law, and give the chosen child a
            # uniformly ranked offspring count among the options.
            z = _min_of_sum_shortcut(lifetime, tau, incubation, log_w, rng)
            p_x, _ = _fit_left_tail_power(
                lambda y: (lifetime.cdf_scalar(tau + y) - lifetime.cdf_scalar(tau))
                / max(1.0 - lifetime.cdf_scalar(tau), 1e-300)
            )
            p_i, _ = _fit_left_tail_power(lambda y: incubation.cdf_scalar(y))
            b = rng.beta(max(p_x, 1e-3), max(p_i, 1e-3))
            x_part = z * b
            total += x_part
            partial.append(total)
            tau_next = z - x_part
            log_rank = log_w + math.log(max(rng.random(), 1e-300))
            log_rank = min(max(log_rank, 0.0), log_w)  # rank j in [1, W]
            neglog = log_d_eff - log_rank
            log_d = _tail_quantile_log(offspring, max(neglog, 0.0))
            d_val = math.exp(log_d) if log_d < 700.0 else math.inf
            tau = tau_next
    return PathSearchResult(True, partial, None)


def _tail_quantile_log(offspring: HeavyTailOffspring, w: float) -> float:
    """log of the offspring quantile at survival level exp(-w)."""
    from scipy.special import gammaln

    a = offspring.alpha
    logz = (w - float(gammaln(1.0 - a))) / a
    if logz < 60.0:
        return math.log(max(offspring.sf_inverse_neglog(w), 1.0))
    return logz


def _min_of_sum_shortcut(
    lifetime: LifetimeLaw,
    tau: float,
    incubation: LifetimeLaw,
    log_count: float,
    rng: np.random.Generator,
) -> float:
    """Minimum over exp(log_count) i.i.d. copies of (X | X >= tau) + I.

    Draws the minimum's uniform level via the order-statistics shortcut and
    inverts the sum's CDF: numerically (Stieltjes convolution on a fine
    grid) while the level is representable, by power-law extrapolation of
    the convolution's left tail beyond.
    """
    tail = max(1.0 - lifetime.cdf_scalar(tau), 1e-300)

    def conv_cdf(y: float) -> float:
        if y <= 0.0:
            return 0.0
        grid = np.linspace(0.0, y, 513)
        mids = 0.5 * (grid[:-1] + grid[1:])
        di = np.diff(np.asarray(incubation.cdf(grid)))
        gx = (
            np.asarray(lifetime.cdf(tau + (y - mids))) - lifetime.cdf_scalar(tau)
        ) / tail
        atom = incubation.cdf_scalar(0.0) * (
            lifetime.cdf_scalar(tau + y) - lifetime.cdf_scalar(tau)
        ) / tail
        return float(atom + np.dot(di, np.clip(gx, 0.0, 1.0)))

    e = max(rng.standard_exponential(), 1e-300)
    w = log_count - math.log(e)  # min at level u = exp(-w)
    if w <= 30.0:
        u = math.exp(-w)
        lo, hi = 0.0, 1.0
        while conv_cdf(hi) < u:
            hi *= 2.0
            if hi > 1e12:
                return hi
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if conv_cdf(mid) >= u:
                hi = mid
            else:
                lo = mid
        return hi
    p, log_c = _fit_left_tail_power(conv_cdf)
    log_y = (-w - log_c) / max(p, 1e-6)
    return math.exp(log_y) if log_y > -700.0 else 0.0
