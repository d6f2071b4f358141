"""Discretized fixed-point operators for the explosion-time survival curve.

For each process variant the monotone operator T maps candidate curves
phi: [0,T] -> [0,1] to new curves; the smallest fixed point of T is
phi(t) = P(no explosion by t) and is reached by iterating from phi == 0.
A curve strictly below 1 anywhere certifies an explosive process, and any
test function Psi != 1 with Psi >= T(Psi) does as well.

Quadrature: Stieltjes integrals against a law use the midpoint rule on the
law's increments over the uniform grid; a possible atom at 0 gets its own
term.  phi between grid points is linearly interpolated, which preserves
the monotonicity of the operator.
"""
from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .laws import thin_by_contagion, thin_by_incubation
from .process import (
    BackwardContagiousProcess,
    BackwardIncubationProcess,
    ClassicalProcess,
    ForwardContagiousProcess,
    ForwardIncubationProcess,
    ProcessSpec,
)

__all__ = [
    "TimeGrid",
    "PhiTable",
    "TestFunction",
    "Verdict",
    "SurvivalReport",
    "GridMismatchError",
    "NonMonotoneIterationError",
    "CertificateNotFoundError",
    "apply_operator",
    "iterate_phi",
    "explosion_verdict",
    "verify_certificate",
    "scaled_certificate_from_classical",
    "survival_probability",
    "stieltjes_convolution",
    "phi_table_to_csv",
]


class GridMismatchError(ValueError):
    """Curve and operator live on different grids."""


class NonMonotoneIterationError(RuntimeError):
    """The monotone iteration decreased somewhere: a quadrature bug."""


class CertificateNotFoundError(RuntimeError):
    """No scaling on the grid produced a passing certificate."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_j = j*dt for j = 0..J with J = ceil(horizon/dt)."""

    dt: float
    horizon: float

    def __post_init__(self):
        if self.dt <= 0.0 or self.horizon <= 0.0:
            raise ValueError("dt and horizon must be positive")

    @property
    def size(self) -> int:
        return int(math.ceil(self.horizon / self.dt - 1e-9))

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.size + 1, dtype=float) * self.dt


@dataclass
class PhiTable:
    """Discretized survival curve of the explosion time: phi(t) = P(V > t)."""

    grid: TimeGrid
    values: np.ndarray
    iterations_used: int = 0
    sup_residual: float = math.inf
    converged: bool = False

    def one_minus(self) -> np.ndarray:
        return 1.0 - self.values


@dataclass
class TestFunction:
    """Grid-aligned candidate certificate Psi: [0,T] -> [0,1]."""

    grid: TimeGrid
    values: np.ndarray


class Verdict(str, enum.Enum):
    EXPLOSIVE = "explosive"
    CONSERVATIVE = "conservative"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class SurvivalReport:
    """Long-run explosion probability eta_infinity and the extinction
    probability q = 1 - eta_infinity of the embedded generation process."""

    eta_infinity: float
    extinction_q: float
    fixed_point_residual: float


# ---------------------------------------------------------------------------
# operator contexts


def stieltjes_convolution(cdf_values: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """S_j = sum_i phi((t_j - u) at cell midpoints) * dG_i + G(0) * phi_j.

    ``cdf_values`` are the law's CDF at the grid points (sub-CDFs allowed);
    phi is linearly interpolated, so the midpoint value is the average of
    adjacent grid values.
    """
    cdf_values = np.asarray(cdf_values, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if cdf_values.shape != phi.shape:
        raise GridMismatchError("cdf table and phi must share the grid")
    dg = np.diff(cdf_values)
    psi = 0.5 * (phi[:-1] + phi[1:])
    out = np.empty_like(phi)
    out[0] = 0.0
    out[1:] = np.convolve(dg, psi)[: len(phi) - 1]
    out += cdf_values[0] * phi
    return out


class _ClassicalCtx:
    def __init__(self, offspring, cdf_values: np.ndarray):
        self.h = offspring.pgf
        self.g = cdf_values

    def apply(self, phi: np.ndarray) -> np.ndarray:
        arg = 1.0 - self.g + stieltjes_convolution(self.g, phi)
        return np.asarray(self.h(np.clip(arg, 0.0, 1.0)), dtype=float)


class _ForwardContagiousCtx:
    def __init__(self, offspring, g_values: np.ndarray, c_values: np.ndarray):
        self.h = offspring.pgf
        self.g = g_values
        self.dg = np.diff(g_values)
        self.c = c_values
        self.dc = np.diff(c_values)

    def apply(self, phi: np.ndarray) -> np.ndarray:
        h, g, dg, c, dc = self.h, self.g, self.dg, self.c, self.dc
        g0, c0 = g[0], c[0]
        J = len(phi) - 1
        psi = 0.5 * (phi[:-1] + phi[1:])
        out = np.empty_like(phi)
        a0_all = 1.0 - g0 + g0 * phi  # inner integral cut at x=0
        out[0] = h(min(1.0, max(0.0, a0_all[0])))
        for j in range(1, J + 1):
            inner = np.empty(j + 1)
            inner[0] = a0_all[j]
            inner[1:] = (
                a0_all[j]
                - (g[1 : j + 1] - g0)
                + np.cumsum(dg[:j] * psi[j - 1 :: -1])
            )
            h_inner = h(np.clip(inner, 0.0, 1.0))
            mids = 0.5 * (inner[:-1] + inner[1:])
            h_mids = h(np.clip(mids, 0.0, 1.0))
            out[j] = (
                c0 * h_inner[0]
                + float(np.dot(dc[:j], h_mids))
                + (1.0 - c[j]) * h_inner[j]
            )
        return out


class _ForwardIncubationCtx:
    def __init__(self, offspring, g_values: np.ndarray, i_values: np.ndarray):
        self.h = offspring.pgf
        self.g = g_values
        self.dg = np.diff(g_values)
        self.i = i_values
        self.di = np.diff(i_values)

    def apply(self, phi: np.ndarray) -> np.ndarray:
        h, g, dg, i_vals, di = self.h, self.g, self.dg, self.i, self.di
        g0, i0 = g[0], i_vals[0]
        J = len(phi) - 1
        psi = 0.5 * (phi[:-1] + phi[1:])
        out = np.empty_like(phi)
        out[0] = i0 * h(min(1.0, max(0.0, 1.0 - g0 + g0 * phi[0]))) + (1.0 - i0)
        for j in range(1, J + 1):
            s = np.cumsum(dg[:j] * psi[j - 1 :: -1])  # integral over (0, x]
            sjj = s[-1]
            inner = np.empty(j + 1)
            # x = 0: the atom of the lifetime law rides with the phi part
            inner[0] = sjj + g0 * phi[j] + 1.0 - g[j]
            inner[1:] = g[1 : j + 1] + (sjj - s) + 1.0 - g[j]
            h_inner = h(np.clip(inner, 0.0, 1.0))
            mids = 0.5 * (inner[:-1] + inner[1:])
            h_mids = h(np.clip(mids, 0.0, 1.0))
            out[j] = i0 * h_inner[0] + float(np.dot(di[:j], h_mids)) + 1.0 - i_vals[j]
        return out


def _context(spec: ProcessSpec, grid: TimeGrid):
    pts = grid.points
    if isinstance(spec, ClassicalProcess):
        return _ClassicalCtx(spec.offspring, spec.lifetime.cdf_values(pts))
    if isinstance(spec, ForwardContagiousProcess):
        return _ForwardContagiousCtx(
            spec.offspring, spec.lifetime.cdf_values(pts), spec.contagious.cdf_values(pts)
        )
    if isinstance(spec, ForwardIncubationProcess):
        return _ForwardIncubationCtx(
            spec.offspring, spec.lifetime.cdf_values(pts), spec.incubation.cdf_values(pts)
        )
    if isinstance(spec, BackwardContagiousProcess):
        thinned = thin_by_contagion(spec.lifetime, spec.contagious, grid_points=pts)
        return _ClassicalCtx(spec.offspring, thinned.values)
    if isinstance(spec, BackwardIncubationProcess):
        thinned = thin_by_incubation(spec.lifetime, spec.incubation, grid_points=pts)
        return _ClassicalCtx(spec.offspring, thinned.values)
    raise TypeError(f"unknown process spec: {spec!r}")


def apply_operator(spec: ProcessSpec, phi: PhiTable | TestFunction) -> PhiTable:
    """One application of the variant's fixed-point operator.

    Backward variants route through the classical operator applied to the
    thinned improper lifetime built on the same grid, so they share every
    floating-point operation with an explicitly thinned classical run.
    """
    ctx = _context(spec, phi.grid)
    values = np.asarray(phi.values, dtype=float)
    if len(values) != phi.grid.size + 1:
        raise GridMismatchError("phi values do not match the grid")
    new = ctx.apply(values)
    resid = float(np.max(np.abs(new - values)))
    iters = getattr(phi, "iterations_used", 0) + 1
    return PhiTable(phi.grid, new, iterations_used=iters, sup_residual=resid)


def iterate_phi(
    spec: ProcessSpec,
    grid: TimeGrid,
    max_iters: int = 10_000,
    tol: float = 1e-8,
) -> PhiTable:
    """Iterate T from phi == 0 to the smallest fixed point.

    The iterates increase pointwise; a decrease beyond rounding noise means
    the quadrature violated monotonicity and raises.  If the sup-norm step
    is still above ``tol`` after ``max_iters`` the table is returned with
    ``converged=False``; verdicts built on it are Inconclusive.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    ctx = _context(spec, grid)
    phi = np.zeros(grid.size + 1)
    resid = math.inf
    iters = 0
    for iters in range(1, max_iters + 1):
        new = ctx.apply(phi)
        if float(np.min(new - phi)) < -1e-12:
            raise NonMonotoneIterationError(
                f"iterate decreased by {float(np.min(new - phi)):.3e} at step {iters}"
            )
        resid = float(np.max(np.abs(new - phi)))
        phi = new
        if resid < tol:
            return PhiTable(grid, phi, iters, resid, converged=True)
    return PhiTable(grid, phi, iters, resid, converged=False)


def explosion_verdict(
    phi: PhiTable,
    threshold: float = 1e-2,
    conservative_margin: float = 1e-7,
) -> Verdict:
    """Explosive if 1 - phi(T) clears ``threshold`` on a converged run;
    Conservative if the converged curve sits at 1 within the margin;
    Inconclusive otherwise, including every non-converged run."""
    if not phi.converged:
        return Verdict.INCONCLUSIVE
    deficit = float(1.0 - np.min(phi.values))
    if deficit > threshold:
        return Verdict.EXPLOSIVE
    if deficit <= conservative_margin:
        return Verdict.CONSERVATIVE
    return Verdict.INCONCLUSIVE


def verify_certificate(
    spec: ProcessSpec, psi: TestFunction, tol: float = 1e-7
) -> bool:
    """True iff Psi >= T(Psi) - tol at every grid point and Psi != 1.

    A passing non-trivial certificate proves the process explosive (the
    smallest solution is dominated by Psi).
    """
    values = np.asarray(psi.values, dtype=float)
    if not np.any(values < 1.0):
        return False
    applied = apply_operator(spec, psi).values
    return bool(np.all(values >= applied - tol))


def scaled_certificate_from_classical(
    phi_classical: PhiTable,
    alpha: float,
    spec_forward: ProcessSpec,
    tol: float = 1e-7,
) -> tuple[TestFunction, float]:
    """Scale the classical deficit into a forward-contagious certificate.

    Tries Psi = 1 - A*(1 - phi_classical) for A on a halving grid starting
    from an alpha-informed bound (contagion thins the operator by roughly
    (1-C(T)), which a factor A**(1-alpha) must absorb).  Returns the first
    passing certificate or raises CertificateNotFoundError once A underflows.
    """
    eta = 1.0 - np.asarray(phi_classical.values, dtype=float)
    if not np.any(eta > 0.0):
        raise CertificateNotFoundError("classical input has no deficit to scale")
    start = 1.0
    if isinstance(spec_forward, ForwardContagiousProcess) and 0.0 < alpha < 1.0:
        c_end = spec_forward.contagious.cdf_scalar(float(phi_classical.grid.horizon))
        if c_end < 1.0:
            start = min(1.0, 2.0 * (1.0 - c_end) ** (1.0 / (1.0 - alpha)))
    a = 1.0
    while a > 0.0:
        if a <= start:
            values = 1.0 - a * eta
            if np.any(values < 1.0):
                psi = TestFunction(phi_classical.grid, values)
                if verify_certificate(spec_forward, psi, tol=tol):
                    return psi, a
            else:
                break  # scaling underflowed: every further A is trivial too
        a *= 0.5
    raise CertificateNotFoundError("no scaling produced a passing certificate")


def survival_probability(spec: ProcessSpec) -> SurvivalReport:
    """Smallest fixed point of the effective offspring pgf.

    q = 1 - eta_infinity solves q = h_eff(q); for the classical process
    h_eff is the offspring pgf itself, for the forward contagious process it
    is the thinned pgf integral.  Solved by 60 bisection steps on the
    monotone region boundary of x - h_eff(x) >= 0.
    """
    from .laws import effective_pgf_fn

    if isinstance(spec, ClassicalProcess):
        f = spec.offspring.pgf
    elif isinstance(spec, ForwardContagiousProcess):
        f = effective_pgf_fn(spec.offspring, spec.lifetime, spec.contagious)
    else:
        raise ValueError("survival analysis covers classical and forward contagious")

    def above(x: float) -> bool:
        return x - float(f(x)) >= 0.0

    if above(0.0):
        q = 0.0
    else:
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if above(mid):
                hi = mid
            else:
                lo = mid
        q = hi
    return SurvivalReport(
        eta_infinity=1.0 - q,
        extinction_q=q,
        fixed_point_residual=abs(q - float(f(q))),
    )


def phi_table_to_csv(phi: PhiTable) -> str:
    """CSV export with the mandatory header ``t,phi,one_minus_phi``."""
    buf = io.StringIO()
    buf.write("t,phi,one_minus_phi\r\n")
    for t, v in zip(phi.grid.points, phi.values):
        buf.write(f"{t!r},{v!r},{1.0 - v!r}\r\n")
    return buf.getvalue()
