"""Process specifications: which laws drive which transmission rule.

Five variants.  The classical process has no periods at all.  Forward
variants attach the period to the parent (contagious: a child is infected
iff its infection time is at most the parent's contagious period;
incubation: iff it is at least the parent's incubation period).  Backward
variants condition on the child's own period, which identifies them with a
classical process under a thinned, improper lifetime law.
"""
from __future__ import annotations

from dataclasses import dataclass

from .laws import ImproperLifetime, LifetimeLaw, OffspringLaw

__all__ = [
    "ProcessSpec",
    "ClassicalProcess",
    "ForwardContagiousProcess",
    "BackwardContagiousProcess",
    "ForwardIncubationProcess",
    "BackwardIncubationProcess",
]


class ProcessSpec:
    """Base class for the five process variants."""

    offspring: OffspringLaw

    def describe(self) -> str:
        return type(self).__name__


@dataclass(eq=True)
class ClassicalProcess(ProcessSpec):
    """Plain age-dependent branching: every child is infected.

    ``lifetime`` may be an improper law, in which case the defect mass is a
    per-child probability of never being infected; this is exactly how the
    backward variants reduce to this class.
    """

    offspring: OffspringLaw
    lifetime: LifetimeLaw | ImproperLifetime


@dataclass(eq=True)
class ForwardContagiousProcess(ProcessSpec):
    """Children infected iff their infection time is within the parent's
    contagious period."""

    offspring: OffspringLaw
    lifetime: LifetimeLaw
    contagious: LifetimeLaw


@dataclass(eq=True)
class BackwardContagiousProcess(ProcessSpec):
    """Infection trail toward an individual under contagious periods;
    equals the classical process under the contagion-thinned lifetime."""

    offspring: OffspringLaw
    lifetime: LifetimeLaw
    contagious: LifetimeLaw


@dataclass(eq=True)
class ForwardIncubationProcess(ProcessSpec):
    """Children infected iff their infection time is at least the parent's
    incubation period."""

    offspring: OffspringLaw
    lifetime: LifetimeLaw
    incubation: LifetimeLaw


@dataclass(eq=True)
class BackwardIncubationProcess(ProcessSpec):
    """Infection trail toward an individual under incubation periods;
    equals the classical process under the incubation-thinned lifetime."""

    offspring: OffspringLaw
    lifetime: LifetimeLaw
    incubation: LifetimeLaw
