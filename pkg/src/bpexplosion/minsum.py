"""Min-summability classifier.

An explosive realization must contain an infinite path of finite total
length, so the sum over generations of the minimum lifetime per generation
must converge; for offspring laws with a plump lower tail this necessary
condition is also sufficient.  The generation sizes are tracked by the
deterministic recursion f(n+1) = F_D^{-1}(1 - 1/f(n)), and the classifier
studies the series of generalized inverses of the lifetime CDF at 1/f(n).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .fpe import Verdict
from .laws import (
    DoubleExpFlatLifetime,
    ExpFlatLifetime,
    FiniteSupportOffspring,
    HeavyTailOffspring,
    LifetimeLaw,
    OffspringLaw,
    PlumpReport,
    QuantileOverflowError,
    TableLifetime,
    check_plump,
)

__all__ = [
    "GrowthSequence",
    "MinSumReport",
    "Method",
    "growth_sequence",
    "minsum_series",
    "classify_minsum",
    "alpha_invariance_scan",
    "AlphaScanReport",
    "minsum_monte_carlo",
    "min_of_sample_neglog",
    "power_transform_table",
]

_FLOAT_CAP = 1e300
_EXACT_QUANTILE_CAP = 1e12


class Method(str, enum.Enum):
    CLOSED_FORM = "closed_form"
    RATIO_HEURISTIC = "ratio_heuristic"
    MONTE_CARLO = "monte_carlo"


@dataclass
class GrowthSequence:
    """f(0) = m0, f(n+1) = F_D^{-1}(1 - 1/f(n)), carried in both plain and
    log form so the doubly exponential growth survives float overflow.

    For the heavy-tail power-law family, once f exceeds 1e300 the remaining
    terms follow the analytic surrogate log f(n+1) = log f(n) / alpha.
    ``alpha_bounds`` are the realized constants (m, m_hat) squeezing
    m**(1/alpha**n) <= f(n) <= m_hat**(1/alpha**n).
    """

    law: OffspringLaw
    m0: int
    values: np.ndarray
    log_values: np.ndarray
    alpha_bounds: tuple[float, float] | None = None

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class MinSumReport:
    terms: tuple[float, ...]
    partial_sums: tuple[float, ...]
    verdict: Verdict
    method: Method
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "terms": list(self.terms),
            "partial_sums": list(self.partial_sums),
            "verdict": self.verdict.value,
            "method": self.method.value,
            "notes": list(self.notes),
        }


def growth_sequence(law: OffspringLaw, m0: int, n_terms: int) -> GrowthSequence:
    """Compute f(0..n_terms).  ``m0`` should come from a plumpness witness."""
    if n_terms > 60:
        raise ValueError("n_terms capped at 60; far tails use the surrogate anyway")
    if m0 < 2:
        raise ValueError("m0 must be at least 2")
    values = [float(m0)]
    logs = [math.log(m0)]
    heavy = isinstance(law, HeavyTailOffspring)
    for _ in range(n_terms):
        cur = values[-1]
        if heavy:
            alpha = law.alpha
            if not math.isfinite(cur) or cur > _FLOAT_CAP:
                logs.append(logs[-1] / alpha)
                values.append(math.inf)
                continue
            if cur > _EXACT_QUANTILE_CAP:
                nxt = law.sf_inverse_neglog(logs[-1])
            else:
                nxt = float(law.quantile(1.0 - 1.0 / cur))
        elif isinstance(law, FiniteSupportOffspring):
            nxt = float(law.quantile(1.0 - 1.0 / cur))
        else:
            raise QuantileOverflowError(
                f"{type(law).__name__} has no quantile/analytic tail surrogate"
            )
        values.append(nxt)
        logs.append(math.log(nxt) if math.isfinite(nxt) else logs[-1] / law.alpha)
    bounds = None
    if heavy:
        expo = law.alpha ** np.arange(len(logs))
        roots = np.exp(expo * np.asarray(logs))
        bounds = (float(np.min(roots)), float(np.max(roots)))
    return GrowthSequence(law, m0, np.asarray(values), np.asarray(logs), bounds)


def _series_terms(lifetime: LifetimeLaw, growth: GrowthSequence) -> np.ndarray:
    # term n is G^{-1}(1/f(n)) = G^{-1}(exp(-log f(n))), n >= 1
    w = growth.log_values[1:]
    return np.asarray(lifetime.inv_cdf_neglog(w), dtype=float)


def minsum_series(
    lifetime: LifetimeLaw,
    growth: GrowthSequence,
    ratio_cut: float = 0.95,
    window: int = 10,
    harmonic_floor: float = 1e-4,
) -> MinSumReport:
    """Classify convergence of sum over n of G^{-1}(1/f(n)).

    For the built-in extremely flat lifetime families with heavy-tail
    offspring the series has a known closed form: the singly exponential
    flat family always converges (explosive); the doubly exponential flat
    family behaves like a p-series with p = 1/power, convergent exactly when
    power < 1, independently of alpha and the scale.

    Otherwise a finite-term heuristic is used: geometric-or-faster decay of
    the last ``window`` terms declares Explosive; bounded-below n*a_n that is
    not shrinking declares Conservative (harmonic or worse); anything in
    between stays Inconclusive rather than guessing.
    """
    terms = _series_terms(lifetime, growth)
    partial = np.cumsum(terms)
    heavy = isinstance(growth.law, HeavyTailOffspring)
    notes: list[str] = []

    if heavy and isinstance(lifetime, ExpFlatLifetime):
        return MinSumReport(
            tuple(terms), tuple(partial), Verdict.EXPLOSIVE, Method.CLOSED_FORM,
            ("terms decay geometrically for every scale and power",),
        )
    if heavy and isinstance(lifetime, DoubleExpFlatLifetime):
        verdict = Verdict.EXPLOSIVE if lifetime.power < 1.0 else Verdict.CONSERVATIVE
        return MinSumReport(
            tuple(terms), tuple(partial), verdict, Method.CLOSED_FORM,
            (f"p-series with exponent 1/power = {1.0 / lifetime.power:g}",),
        )

    tail = terms[-window:]
    n_idx = np.arange(len(terms) - len(tail) + 1, len(terms) + 1, dtype=float)
    if np.all(tail == 0.0):
        return MinSumReport(
            tuple(terms), tuple(partial), Verdict.EXPLOSIVE, Method.RATIO_HEURISTIC,
            ("terms vanished below float resolution",),
        )
    prev = terms[-window - 1 : -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(prev > 0.0, tail / np.maximum(prev, 1e-300), 0.0)
    if np.all(ratios <= ratio_cut):
        return MinSumReport(
            tuple(terms), tuple(partial), Verdict.EXPLOSIVE, Method.RATIO_HEURISTIC,
            (f"last {window} term ratios all at most {ratio_cut}",),
        )
    weighted = n_idx * tail
    nondecreasing = np.all(weighted[1:] >= 0.99 * weighted[:-1])
    if np.all(weighted >= harmonic_floor) and nondecreasing:
        return MinSumReport(
            tuple(terms), tuple(partial), Verdict.CONSERVATIVE, Method.RATIO_HEURISTIC,
            ("n * a_n bounded away from zero and not shrinking",),
        )
    notes.append("finite-term heuristics were inconclusive")
    return MinSumReport(
        tuple(terms), tuple(partial), Verdict.INCONCLUSIVE, Method.RATIO_HEURISTIC,
        tuple(notes),
    )


def classify_minsum(
    offspring: OffspringLaw,
    lifetime: LifetimeLaw,
    n_terms: int = 60,
    m0_override: int | None = None,
) -> MinSumReport:
    """Full pipeline: plumpness gate, growth recursion, series verdict.

    Min-summability is equivalent to explosiveness only for plump offspring
    laws; when the plumpness check fails the classifier refuses a verdict.
    """
    plump = check_plump(offspring)
    if m0_override is not None:
        m0 = m0_override
    elif plump.is_plump:
        m0 = 2 * plump.m0  # safety margin: plumpness must hold from m0 on
    else:
        return MinSumReport(
            (), (), Verdict.INCONCLUSIVE, Method.RATIO_HEURISTIC,
            ("offspring law not verified plump; min-sum criterion inapplicable",),
        )
    growth = growth_sequence(offspring, m0, n_terms)
    report = minsum_series(lifetime, growth)
    if not plump.is_plump:
        return MinSumReport(
            report.terms, report.partial_sums, Verdict.INCONCLUSIVE, report.method,
            report.notes + ("offspring law not verified plump",),
        )
    return report


@dataclass(frozen=True)
class AlphaScanReport:
    alphas: tuple[float, ...]
    verdicts: tuple[Verdict, ...]
    theorem_violation: bool


def alpha_invariance_scan(
    lifetime: LifetimeLaw, alphas: list[float], n_terms: int = 60
) -> AlphaScanReport:
    """Explosiveness of the heavy-tail family must not depend on alpha;
    a mixed Explosive/Conservative outcome is flagged as a diagnostic."""
    verdicts = tuple(
        classify_minsum(HeavyTailOffspring(a), lifetime, n_terms).verdict
        for a in alphas
    )
    decided = {v for v in verdicts if v is not Verdict.INCONCLUSIVE}
    return AlphaScanReport(tuple(alphas), verdicts, theorem_violation=len(decided) > 1)


# ---------------------------------------------------------------------------
# Monte Carlo route


def min_of_sample_neglog(
    lifetime: LifetimeLaw, log_count: float, exp_draw: float
) -> float:
    """One draw of min(X_1..X_M) with M = exp(log_count) i.i.d. lifetimes.

    Uses the order-statistics shortcut min = G^{-1}(1 - (1-U)^{1/M}); the
    count enters only through 1/M, so astronomically large M is fine.
    ``exp_draw`` is a standard exponential variate (i.e. -log(1-U)).
    """
    e = max(exp_draw, 1e-300)
    if log_count <= 700.0:
        m = math.exp(log_count)
        x = e / m
        w = -math.log(-math.expm1(-x)) if x > 1e-15 else log_count - math.log(e)
    else:
        w = log_count - math.log(e)
    return float(lifetime.inv_cdf_neglog(max(w, 0.0)))


def minsum_monte_carlo(
    alpha: float,
    lifetime: LifetimeLaw,
    n_terms: int = 40,
    trials: int = 200,
    master_seed: int = 0,
    tail_tol: float = 1e-6,
    ratio_cap: float = 0.75,
    increment_floor: float = 1e-3,
) -> MinSumReport:
    """Simulate S_N = sum_n min over exp(1/alpha**n) lifetimes per trial.

    Verdict: Explosive when the trial-median Cauchy tail S_N - S_{N/2} is
    below ``tail_tol`` or when successive half-tails shrink by ``ratio_cap``
    or more (a convergence-order estimate; an absolute tolerance alone
    cannot see p-series convergence at feasible N).  Conservative when the
    late increments stay bounded below and the half-tails do not shrink.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0,1)")
    if n_terms > 40:
        raise ValueError("n_terms capped at 40 for the Monte Carlo route")
    if trials < 100:
        raise ValueError("need at least 100 trials")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(master_seed, 0x5EED)))
    log_counts = (1.0 / alpha) ** np.arange(1, n_terms + 1)
    # the count is round(exp(1/alpha**n)) while that is representable
    for i, w in enumerate(log_counts):
        if w <= 30.0:
            log_counts[i] = math.log(max(1.0, round(math.exp(w))))
    terms = np.empty((trials, n_terms))
    exps = rng.standard_exponential((trials, n_terms))
    for t in range(trials):
        for n in range(n_terms):
            terms[t, n] = min_of_sample_neglog(lifetime, log_counts[n], exps[t, n])
    sums = np.cumsum(terms, axis=1)
    half = n_terms // 2
    quarter = n_terms // 4
    tail2 = float(np.median(sums[:, -1] - sums[:, half - 1]))
    tail1 = float(np.median(sums[:, half - 1] - sums[:, quarter - 1]))
    late_inc = float(np.median(np.mean(terms[:, -5:], axis=1)))
    med_terms = np.median(terms, axis=0)
    med_sums = np.cumsum(med_terms)
    ratio = tail2 / tail1 if tail1 > 1e-300 else 0.0
    if tail2 < tail_tol or ratio <= ratio_cap:
        verdict = Verdict.EXPLOSIVE
        note = f"half-tail {tail2:.3g}, shrink ratio {ratio:.3g}"
    elif late_inc >= increment_floor and ratio >= 0.95:
        verdict = Verdict.CONSERVATIVE
        note = f"late increments {late_inc:.3g} non-vanishing, ratio {ratio:.3g}"
    else:
        verdict = Verdict.INCONCLUSIVE
        note = f"half-tail {tail2:.3g}, ratio {ratio:.3g}: no clear call"
    return MinSumReport(
        tuple(med_terms), tuple(med_sums), verdict, Method.MONTE_CARLO, (note,)
    )


def power_transform_table(
    lifetime: LifetimeLaw, exponent: float, t_max: float | None = None, knots: int = 2048
) -> TableLifetime:
    """The law with CDF G(t)**exponent, tabulated in -log F space so the
    extremely flat left tail stays invertible far below float underflow."""
    if t_max is None:
        t_max = max(1.0, 2.0 * lifetime.inv_scalar(0.999))
    lo = min(1e-4, t_max * 1e-6)
    ts = np.geomspace(lo, t_max, knots)
    neglog = exponent * np.asarray(lifetime.neglog_cdf(ts), dtype=float)
    neglog = np.minimum(neglog, 1e300)
    ts = np.append(ts, t_max * 1.001)
    neglog = np.append(neglog, 0.0)
    neglog = np.minimum.accumulate(neglog)
    fs = np.exp(-neglog)
    fs[-1] = 1.0
    return TableLifetime(list(zip(ts, fs)), neglog=neglog)
