"""Simple support belief functions on the frame {wall, not wall}.

A detected wall with necessity alpha is the mass assignment m({wall}) = alpha,
m(Omega) = 1 - alpha, so Bel(wall) = alpha and Pl(wall) = 1.  Independent
detections combine by Dempster's rule, which for two such masses never
produces conflict and reduces to the probabilistic sum.  Detections that are
not independent combine by max, the lower envelope of the intersection of
the two credal sets.

This module backs the grid's choice of operators; the grid does not call it.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SimpleSupportMass:
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")

    @property
    def m_wall(self) -> float:
        return self.alpha

    @property
    def m_not_wall(self) -> float:
        return 0.0

    @property
    def m_empty(self) -> float:
        return 0.0

    @property
    def m_omega(self) -> float:
        return 1.0 - self.alpha

    def masses(self) -> dict:
        return {"empty": 0.0, "wall": self.alpha, "not_wall": 0.0, "omega": self.m_omega}


def bel_pl(mass: SimpleSupportMass) -> tuple[float, float]:
    """(Bel(wall), Pl(wall)).

    Bel sums the masses of subsets of {wall}; Pl sums those of sets meeting
    {wall}, i.e. m({wall}) + m(Omega), which is always 1 here.
    """
    bel = mass.m_wall + mass.m_empty
    pl = mass.m_wall + mass.m_omega
    return bel, min(1.0, pl)


def dempster_combine(a: SimpleSupportMass, b: SimpleSupportMass) -> SimpleSupportMass:
    """Dempster's rule for two simple support masses focused on {wall}.

    {wall} collects m1(wall) * (m2(wall) + m2(Omega)) + m1(Omega) * m2(wall);
    the bracket is 1, and no pair of focal sets is disjoint, so there is
    nothing to normalise.  Operands are ordered so the rule is symmetric.
    """
    hi, lo = (a.alpha, b.alpha) if a.alpha >= b.alpha else (b.alpha, a.alpha)
    return SimpleSupportMass(min(1.0, hi + (1.0 - hi) * lo))


def combined_omega(a: SimpleSupportMass, b: SimpleSupportMass) -> float:
    """Mass left on Omega after Dempster combination: (1 - a)(1 - b)."""
    return (1.0 - a.alpha) * (1.0 - b.alpha)


def max_combine(a: SimpleSupportMass, b: SimpleSupportMass) -> SimpleSupportMass:
    return SimpleSupportMass(max(a.alpha, b.alpha))


def compatible_interval(a: SimpleSupportMass, b: SimpleSupportMass) -> tuple[float, float]:
    """Bounds on P(wall) over the probabilities compatible with both masses."""
    bel_a, pl_a = bel_pl(a)
    bel_b, pl_b = bel_pl(b)
    return max(bel_a, bel_b), min(pl_a, pl_b)
