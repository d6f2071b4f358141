"""Event-driven Monte Carlo simulation of the five processes.

Explosion is proxied by "cap births happen before the horizon"; the proxy
time is the birth time of the cap-th individual.  Families are generated
lazily in increasing birth-time order (sequential order statistics of the
admitted infection times), so per-trial work is bounded by the cap even
though the offspring laws have infinite mean.  Backward variants simulate
the classical process under the thinned improper lifetime, which is the
identity the theory provides.
"""
from __future__ import annotations

import heapq
import math
import random
from bisect import insort
from dataclasses import dataclass, field

import numpy as np

from .laws import (
    DeterministicLifetime,
    FiniteSupportOffspring,
    HeavyTailOffspring,
    ImproperLifetime,
    LifetimeLaw,
    OffspringLaw,
    thin_by_contagion,
    thin_by_incubation,
)
from .process import (
    BackwardContagiousProcess,
    BackwardIncubationProcess,
    ClassicalProcess,
    ForwardContagiousProcess,
    ForwardIncubationProcess,
    ProcessSpec,
)

__all__ = [
    "SimConfig",
    "SimOutcome",
    "EmpiricalDistribution",
    "DominationReport",
    "GrowthDiagnostic",
    "CapMemoryExceededError",
    "SampleTooSmallError",
    "simulate",
    "simulate_forward",
    "simulate_backward",
    "empirical_explosion_time",
    "domination_test",
    "generation_growth_diagnostic",
    "empirical_to_csv",
]

_ONE_BELOW = math.nextafter(1.0, 0.0)
_SMALL_FAMILY = 16
_MAX_BINOMIAL_N = 2**62


class CapMemoryExceededError(RuntimeError):
    """Pending-event count ran away; the configuration is unworkable."""


class SampleTooSmallError(ValueError):
    """Too few uncensored trials for a meaningful comparison."""


@dataclass(frozen=True)
class SimConfig:
    process: ProcessSpec
    horizon: float
    cap: int = 100_000
    trials: int = 1
    master_seed: int = 0

    def __post_init__(self):
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")
        if self.cap < 1:
            raise ValueError("cap must be at least 1")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")


@dataclass
class SimOutcome:
    """One trial: proxy explosion flag/time, birth counts, generation sizes,
    and the candidate/admitted child tallies used by thinning diagnostics."""

    exploded_proxy: bool
    proxy_time: float
    births: int
    generation_sizes: list[int]
    candidates: int
    admitted: int


@dataclass
class EmpiricalDistribution:
    """Sorted finite explosion-proxy times plus the censored-trial count."""

    times: np.ndarray
    censored: int
    trials: int

    def cdf_at(self, t: np.ndarray) -> np.ndarray:
        """Empirical CDF with censored trials counted as +infinity."""
        return np.searchsorted(self.times, t, side="right") / self.trials


@dataclass(frozen=True)
class DominationReport:
    violated: bool
    max_gap: float
    critical_value: float
    level: float


@dataclass
class GrowthDiagnostic:
    trajectories: np.ndarray  # [trials, generations+1] of alpha**n * log(Z_n + 1)
    stabilized_fraction: float


def trial_rngs(master_seed: int, trial_index: int):
    """Derive the per-trial (stdlib, numpy) generator pair."""
    ss = np.random.SeedSequence(
        entropy=(int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(trial_index))
    )
    py_ss, np_ss = ss.spawn(2)
    py = random.Random(int.from_bytes(py_ss.generate_state(4).tobytes(), "little"))
    return py, np.random.default_rng(np_ss)


# ---------------------------------------------------------------------------
# the event engine


class _Plan:
    """Per-config immutable simulation plan: how a family spawns children."""

    def __init__(self, spec: ProcessSpec, horizon: float):
        self.offspring = spec.offspring
        self.period: LifetimeLaw | None = None
        self.incubation_rule = False
        if isinstance(spec, ClassicalProcess):
            self.window_law = spec.lifetime
        elif isinstance(spec, ForwardContagiousProcess):
            self.window_law = spec.lifetime
            self.period = spec.contagious
        elif isinstance(spec, ForwardIncubationProcess):
            self.window_law = spec.lifetime
            self.period = spec.incubation
            self.incubation_rule = True
        elif isinstance(spec, BackwardContagiousProcess):
            self.window_law = thin_by_contagion(
                spec.lifetime, spec.contagious, cells=16384, horizon=_thin_horizon(spec.lifetime, horizon)
            )
        elif isinstance(spec, BackwardIncubationProcess):
            self.window_law = thin_by_incubation(
                spec.lifetime, spec.incubation, cells=16384, horizon=_thin_horizon(spec.lifetime, horizon)
            )
        else:
            raise TypeError(f"unknown process spec: {spec!r}")
        if isinstance(self.offspring, (HeavyTailOffspring, FiniteSupportOffspring)):
            self.draw_offspring = self.offspring.quantile_fast
        else:
            raise ValueError(
                f"{type(self.offspring).__name__} cannot be sampled; "
                "simulation needs a quantile-capable offspring law"
            )


def _thin_horizon(lifetime: LifetimeLaw, horizon: float) -> float:
    med = lifetime.median()
    base = 50.0 * med if math.isfinite(med) and med > 0.0 else 1.0
    return max(base, horizon, 1.0)


def _run_trial(plan: _Plan, horizon: float, cap: int, py, npg) -> SimOutcome:
    inv = plan.window_law.inv_scalar
    cdf = plan.window_law.cdf_scalar
    draw_d = plan.draw_offspring
    rand = py.random
    period = plan.period
    incubation_rule = plan.incubation_rule

    heap: list = []
    seq = 0
    births = 0
    proxy_time = math.inf
    gen_sizes: list[int] = []
    candidates = 0
    admitted = 0
    heap_cap = 8 * cap

    def spawn(t: float, child_gen: int):
        """Create the family of an individual born at t; push its first child."""
        nonlocal seq, candidates, admitted
        d = draw_d(rand())
        candidates += d
        lo_u = 0.0
        hi_t = horizon - t
        if period is not None:
            tau = period.sample_py(py)
            if incubation_rule:
                if tau > hi_t:
                    return
                lo_u = cdf(tau)
            else:
                if tau < hi_t:
                    hi_t = tau
        if d == 0 or hi_t < 0.0:
            return
        hi_u = cdf(hi_t)
        if hi_u <= lo_u:
            return
        if d <= _SMALL_FAMILY:
            times = []
            for _ in range(d):
                v = rand()
                if lo_u <= v < hi_u:
                    insort(times, t + inv(v))
            if not times:
                return
            admitted += len(times)
            fam = [child_gen, times, 1]
            heapq.heappush(heap, (times[0], seq, 0, fam))
        else:
            n = min(d, _MAX_BINOMIAL_N)
            m = int(npg.binomial(n, hi_u - lo_u))
            if m == 0:
                return
            admitted += m
            log_gap = math.log(hi_u - lo_u) + math.log(rand()) / m
            u = min(hi_u - math.exp(log_gap), _ONE_BELOW)
            fam = [child_gen, t, m - 1, log_gap, hi_u]
            heapq.heappush(heap, (t + inv(u), seq, 1, fam))
        seq += 1

    # the root is the first birth, at time 0
    births = 1
    gen_sizes.append(1)
    if births >= cap:
        return SimOutcome(True, 0.0, births, gen_sizes, candidates, admitted)
    spawn(0.0, 1)

    while heap:
        t, _, kind, fam = heapq.heappop(heap)
        gen = fam[0]
        births += 1
        while len(gen_sizes) <= gen:
            gen_sizes.append(0)
        gen_sizes[gen] += 1
        if births >= cap:
            proxy_time = t
            break
        # next sibling of the same family
        if kind == 0:
            times, idx = fam[1], fam[2]
            if idx < len(times):
                fam[2] = idx + 1
                heapq.heappush(heap, (times[idx], seq, 0, fam))
                seq += 1
        else:
            rem = fam[2]
            if rem > 0:
                fam[3] += math.log(rand()) / rem
                fam[2] = rem - 1
                u = min(fam[4] - math.exp(fam[3]), _ONE_BELOW)
                heapq.heappush(heap, (fam[1] + inv(u), seq, 1, fam))
                seq += 1
        if len(heap) > heap_cap:
            raise CapMemoryExceededError(
                f"{len(heap)} pending events exceeds 8x cap = {heap_cap}"
            )
        spawn(t, gen + 1)

    exploded = math.isfinite(proxy_time)
    return SimOutcome(exploded, proxy_time, births, gen_sizes, candidates, admitted)


def simulate(config: SimConfig, trial_index: int = 0) -> SimOutcome:
    """Run one trial; deterministic in (master_seed, trial_index)."""
    plan = _Plan(config.process, config.horizon)
    py, npg = trial_rngs(config.master_seed, trial_index)
    return _run_trial(plan, config.horizon, config.cap, py, npg)


def simulate_forward(config: SimConfig, trial_index: int = 0) -> SimOutcome:
    """One trial of a classical or forward process."""
    if not isinstance(
        config.process,
        (ClassicalProcess, ForwardContagiousProcess, ForwardIncubationProcess),
    ):
        raise ValueError("simulate_forward needs a classical or forward spec")
    return simulate(config, trial_index)


def simulate_backward(config: SimConfig, trial_index: int = 0) -> SimOutcome:
    """One trial of a backward process (classical under the thinned law)."""
    if not isinstance(
        config.process, (BackwardContagiousProcess, BackwardIncubationProcess)
    ):
        raise ValueError("simulate_backward needs a backward spec")
    return simulate(config, trial_index)


def empirical_explosion_time(config: SimConfig) -> EmpiricalDistribution:
    """Proxy explosion times across trials; censored trials never reached
    the cap within the horizon."""
    if config.trials < 30:
        raise ValueError("need at least 30 trials for an empirical distribution")
    plan = _Plan(config.process, config.horizon)
    times = []
    censored = 0
    for i in range(config.trials):
        py, npg = trial_rngs(config.master_seed, i)
        out = _run_trial(plan, config.horizon, config.cap, py, npg)
        if out.exploded_proxy:
            times.append(out.proxy_time)
        else:
            censored += 1
    return EmpiricalDistribution(np.sort(np.asarray(times)), censored, config.trials)


def domination_test(
    lower: EmpiricalDistribution,
    upper: EmpiricalDistribution,
    level: float = 0.01,
) -> DominationReport:
    """One-sided two-sample KS check of stochastic domination.

    ``lower`` is the side predicted stochastically smaller (its CDF should
    dominate).  The statistic is sup_t (F_upper(t) - F_lower(t)); censored
    trials enter both CDFs as +infinity.  Violation means the gap exceeds
    the one-sided critical value at ``level``.
    """
    n_eff = len(lower.times)
    m_eff = len(upper.times)
    if min(n_eff, m_eff) < 30:
        raise SampleTooSmallError(
            f"effective sample sizes {n_eff}/{m_eff} below 30"
        )
    pooled = np.union1d(lower.times, upper.times)
    gap = upper.cdf_at(pooled) - lower.cdf_at(pooled)
    max_gap = float(np.max(gap, initial=0.0))
    n, m = lower.trials, upper.trials
    critical = math.sqrt(-math.log(level) * (n + m) / (2.0 * n * m))
    return DominationReport(max_gap > critical, max_gap, critical, level)


def empirical_to_csv(dist: EmpiricalDistribution) -> str:
    """CSV export, one row per trial: proxy_time, censored flag."""
    lines = ["proxy_time,censored"]
    for t in dist.times:
        lines.append(f"{float(t)!r},0")
    lines.extend(["inf,1"] * dist.censored)
    return "\r\n".join(lines) + "\r\n"


# ---------------------------------------------------------------------------
# generation-growth diagnostic


def _stable_one_sided(alpha: float, rng: np.random.Generator) -> float:
    """One-sided alpha-stable variate with Laplace transform exp(-s**alpha)
    (Kanter's construction)."""
    u = rng.uniform(0.0, math.pi)
    e = max(rng.standard_exponential(), 1e-300)
    a = alpha
    return (
        math.sin(a * u)
        / math.sin(u) ** (1.0 / a)
        * (math.sin((1.0 - a) * u) / e) ** ((1.0 - a) / a)
    )


def generation_growth_diagnostic(
    offspring: OffspringLaw,
    alpha: float,
    trials: int,
    max_gen: int,
    master_seed: int = 0,
    exact_cap: int = 100_000,
) -> GrowthDiagnostic:
    """Track alpha**n * log(Z_n + 1) per trial for the plain generation
    process (no lifetimes).  For heavy-tail power-law offspring this
    stabilizes to an almost-sure limit; degenerate growth stabilizes at 0.

    Generations up to ``exact_cap`` individuals are summed exactly; beyond
    that the next generation is drawn from the limiting one-sided stable law
    of normalized heavy-tail sums (Z' = Z**(1/alpha) * S), which preserves
    the trajectory's distributional course where per-individual summation is
    infeasible.  Finite-mean laws use a CLT step instead.
    """
    if max_gen > 12:
        raise ValueError("max_gen capped at 12: growth is doubly exponential")
    heavy = isinstance(offspring, HeavyTailOffspring)
    if not heavy and not isinstance(offspring, FiniteSupportOffspring):
        raise ValueError("diagnostic needs a sampleable offspring law")
    if not heavy:
        mean = sum(k * p for k, p in offspring.points)
        var = sum(k * k * p for k, p in offspring.points) - mean * mean
    traj = np.zeros((trials, max_gen + 1))
    for t in range(trials):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=(int(master_seed), t, 0xD1A6))
        )
        z = 1.0
        logz = 0.0
        traj[t, 0] = math.log(2.0)  # alpha**0 * log(Z_0 + 1), Z_0 = 1
        for n in range(1, max_gen + 1):
            if z <= exact_cap:
                if z < 1.0:
                    pass  # extinct: stays extinct
                else:
                    z = float(np.sum(offspring.sample_many(rng, int(z))))
                logz = math.log(z) if z > 0.0 else -math.inf
            elif heavy:
                s = _stable_one_sided(offspring.alpha, rng)
                logz = logz / offspring.alpha + math.log(max(s, 1e-300))
                z = math.exp(logz) if logz < 690.0 else math.inf
            else:
                noise = rng.standard_normal() * math.sqrt(max(var, 0.0) / z) / max(mean, 1e-12)
                logz = logz + math.log(mean) + noise
                z = math.exp(logz) if logz < 690.0 else math.inf
            if z <= 0.0:
                traj[t, n] = 0.0
            elif math.isfinite(z) and z < 1e15:
                traj[t, n] = alpha**n * math.log1p(z)
            else:
                traj[t, n] = alpha**n * logz
        # trailing extinction keeps value 0
    last = traj[:, -3:]
    spread = last.max(axis=1) - last.min(axis=1)
    mean_last = last.mean(axis=1)
    stabilized = (last.max(axis=1) < 0.02) | (spread < 0.1 * np.maximum(mean_last, 1e-300))
    return GrowthDiagnostic(traj, float(np.mean(stabilized)))
