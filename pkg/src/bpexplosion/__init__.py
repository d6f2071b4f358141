"""Explosiveness analysis for age-dependent branching processes with
contagious and incubation periods: fixed-point solvers for the explosion
time's survival curve, the min-summability classifier, and event-driven
Monte Carlo with stochastic-domination checks."""

from .laws import (
    DeterministicLifetime,
    DoubleExpFlatLifetime,
    ExpFlatLifetime,
    ExponentialLifetime,
    FiniteSupportOffspring,
    HeavyTailOffspring,
    ImproperLifetime,
    LogCorrectedOffspring,
    PlumpReport,
    TableLifetime,
    UniformLifetime,
    check_plump,
    effective_pgf,
    thin_by_contagion,
    thin_by_incubation,
    truncate_to_one,
)
from .process import (
    BackwardContagiousProcess,
    BackwardIncubationProcess,
    ClassicalProcess,
    ForwardContagiousProcess,
    ForwardIncubationProcess,
)
from .fpe import (
    PhiTable,
    SurvivalReport,
    TestFunction,
    TimeGrid,
    Verdict,
    apply_operator,
    explosion_verdict,
    iterate_phi,
    scaled_certificate_from_classical,
    survival_probability,
    verify_certificate,
)
from .minsum import (
    AlphaScanReport,
    GrowthSequence,
    Method,
    MinSumReport,
    alpha_invariance_scan,
    classify_minsum,
    growth_sequence,
    minsum_monte_carlo,
    minsum_series,
)
from .sim import (
    DominationReport,
    EmpiricalDistribution,
    GrowthDiagnostic,
    SimConfig,
    SimOutcome,
    domination_test,
    empirical_explosion_time,
    generation_growth_diagnostic,
    simulate,
    simulate_backward,
    simulate_forward,
)
from .pathsearch import PathSearchResult, exploding_path_search

__version__ = "0.1.0"
