"""Disease-risk model for nuclear-family genotype data.

Family members are coded by genotype score, the number of copies of the
variant allele (0, 1 or 2) carried by the mother, the father and the
child.  Disease risk follows a multiplicative relative-risk penetrance

    P(affected | m, f, c) = delta * r1^[c=1] * r2^[c=2]
                                  * r_im^[c=1 and allele from mother]
                                  * s1^[m=1] * s2^[m=2]

where ``delta`` is the phenocopy rate, ``r1``/``r2`` the child-genotype
effects, ``r_im`` the extra effect of a maternally inherited single copy
(imprinting) and ``s1``/``s2`` the maternal-genotype effects.

The module enumerates the 15 Mendelian-compatible (mother, father,
child) triad genotype combinations, in the canonical lexicographic
order used by every vector, file and report in this package, together
with the 7 (mother, child) pair combinations left when the father is
unobserved.  It computes exact joint probabilities of disease status
and family genotypes given a mating-type distribution mu[m, f], the
population probability that the mother carries m and the father f
copies.  No symmetry between mu[m, f] and mu[f, m] is assumed anywhere.

Everything here is a pure function of immutable values and safe to use
concurrently.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

GENOTYPE_SCORES = (0, 1, 2)

PARAM_NAMES = ("delta", "r1", "r2", "r_im", "s1", "s2")
RISK_NAMES = ("r1", "r2", "r_im", "s1", "s2")


class FeasibilityError(ValueError):
    """Parameters give a disease probability >= 1 for some family type.

    ``cell`` identifies the first offending genotype combination.
    """

    def __init__(self, message: str, cell: str):
        super().__init__(message)
        self.cell = cell


def _check_score(value: int, member: str) -> None:
    if value not in GENOTYPE_SCORES:
        raise ValueError(f"{member} genotype score must be 0, 1 or 2, got {value!r}")


def transmission_prob(m: int, f: int, c: int) -> float:
    """Mendelian probability that parents with scores (m, f) produce a child with score c.

    Total over c in {0, 1, 2} is 1 for every parental pair; incompatible
    children get probability 0.
    """
    _check_score(m, "mother")
    _check_score(f, "father")
    _check_score(c, "child")
    pm = m / 2.0  # chance the maternal allele is the variant
    pf = f / 2.0
    if c == 0:
        return (1.0 - pm) * (1.0 - pf)
    if c == 1:
        return pm * (1.0 - pf) + (1.0 - pm) * pf
    return pm * pf


@dataclass(frozen=True)
class TriadType:
    """One Mendelian-compatible (mother, father, child) genotype combination.

    ``branches`` lists the distinct origins of the child's variant allele
    as (Mendelian probability, allele inherited from mother) pairs.  Only
    the type with two heterozygous parents and a heterozygous child has
    two branches: there the origin is ambiguous and both carry equal
    probability.  ``maternal_origin`` is None whenever the child is not
    heterozygous.
    """

    index: int  # 1-based position in the canonical ordering
    m: int
    f: int
    c: int
    branches: tuple[tuple[float, Optional[bool]], ...]

    @property
    def transmission(self) -> float:
        return sum(weight for weight, _ in self.branches)

    @property
    def genotypes(self) -> tuple[int, int, int]:
        return (self.m, self.f, self.c)


TRIAD_TYPES: tuple[TriadType, ...] = (
    TriadType(1, 0, 0, 0, ((1.0, None),)),
    TriadType(2, 0, 1, 0, ((0.5, None),)),
    TriadType(3, 0, 1, 1, ((0.5, False),)),
    TriadType(4, 0, 2, 1, ((1.0, False),)),
    TriadType(5, 1, 0, 0, ((0.5, None),)),
    TriadType(6, 1, 0, 1, ((0.5, True),)),
    TriadType(7, 1, 1, 0, ((0.25, None),)),
    TriadType(8, 1, 1, 1, ((0.25, True), (0.25, False))),
    TriadType(9, 1, 1, 2, ((0.25, None),)),
    TriadType(10, 1, 2, 1, ((0.5, False),)),
    TriadType(11, 1, 2, 2, ((0.5, None),)),
    TriadType(12, 2, 0, 1, ((1.0, True),)),
    TriadType(13, 2, 1, 1, ((0.5, True),)),
    TriadType(14, 2, 1, 2, ((0.5, None),)),
    TriadType(15, 2, 2, 2, ((1.0, None),)),
)

TRIAD_BY_GENOTYPES = {t.genotypes: t for t in TRIAD_TYPES}


@dataclass(frozen=True)
class PairType:
    """A (mother, child) genotype combination with the father unobserved.

    ``triad_indices`` are the triad types that collapse onto this pair,
    i.e. the father genotypes compatible with (m, c).
    """

    index: int  # 1-based position in the canonical ordering
    m: int
    c: int
    triad_indices: tuple[int, ...]

    @property
    def excluded(self) -> bool:
        """True for the doubly heterozygous pair.

        The origin of the child's allele depends on the unobserved
        father there, so the mating weights do not factor out of its
        probability and the type cannot enter the partial likelihood.
        """
        return self.m == 1 and self.c == 1

    @property
    def genotypes(self) -> tuple[int, int]:
        return (self.m, self.c)


PAIR_TYPES: tuple[PairType, ...] = (
    PairType(1, 0, 0, (1, 2)),
    PairType(2, 0, 1, (3, 4)),
    PairType(3, 1, 0, (5, 7)),
    PairType(4, 1, 1, (6, 8, 10)),
    PairType(5, 1, 2, (9, 11)),
    PairType(6, 2, 1, (12, 13)),
    PairType(7, 2, 2, (14, 15)),
)

PAIR_BY_GENOTYPES = {p.genotypes: p for p in PAIR_TYPES}
EXCLUDED_PAIR = PAIR_BY_GENOTYPES[(1, 1)]


def _penetrance_value(
    delta: float,
    r1: float,
    r2: float,
    r_im: float,
    s1: float,
    s2: float,
    m: int,
    c: int,
    maternal_origin: Optional[bool],
) -> float:
    risk = delta
    if c == 1:
        risk *= r1
        if maternal_origin:
            risk *= r_im
    elif c == 2:
        risk *= r2
    if m == 1:
        risk *= s1
    elif m == 2:
        risk *= s2
    return risk


def _feasibility_violation(
    delta: float, r1: float, r2: float, r_im: float, s1: float, s2: float
) -> Optional[str]:
    """Label of the first family type whose disease probability reaches 1, or None."""
    for t in TRIAD_TYPES:
        for _, origin in t.branches:
            risk = _penetrance_value(delta, r1, r2, r_im, s1, s2, t.m, t.c, origin)
            if risk >= 1.0:
                cell = f"(m,f,c)=({t.m},{t.f},{t.c})"
                if len(t.branches) > 1:
                    side = "mother" if origin else "father"
                    cell += f" with the variant allele from the {side}"
                return cell
    return None


@dataclass(frozen=True)
class RiskParameters:
    """Multiplicative disease-model parameters.

    delta is the phenocopy rate (baseline disease probability); r1 and r2
    are the relative risks of one and two variant copies in the child;
    r_im multiplies the risk of a heterozygous child whose variant allele
    came from the mother; s1 and s2 are the relative risks of one and two
    copies in the mother regardless of the child's genotype.

    Construction eagerly validates that the disease probability of every
    family type stays below 1 and reports the first violating genotype
    combination otherwise, so downstream code can rely on penetrances
    being proper probabilities.
    """

    delta: float
    r1: float = 1.0
    r2: float = 1.0
    r_im: float = 1.0
    s1: float = 1.0
    s2: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.delta) and 0.0 < self.delta < 1.0):
            raise ValueError(f"phenocopy rate must be in (0, 1), got {self.delta!r}")
        for name in RISK_NAMES:
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"relative risk {name} must be positive and finite, got {value!r}")
        cell = _feasibility_violation(self.delta, self.r1, self.r2, self.r_im, self.s1, self.s2)
        if cell is not None:
            raise FeasibilityError(f"disease probability reaches 1 for family type {cell}", cell)

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def replace(self, **changes) -> "RiskParameters":
        return dataclasses.replace(self, **changes)


def penetrance(
    params: RiskParameters, m: int, c: int, maternal_origin: Optional[bool] = None
) -> float:
    """Disease probability of a child with score c whose mother has score m.

    ``maternal_origin`` states whether a heterozygous child's variant
    allele was inherited from the mother and must be supplied exactly
    when c == 1; for other child genotypes the origin is meaningless and
    must be omitted.
    """
    _check_score(m, "mother")
    _check_score(c, "child")
    if c == 1 and maternal_origin is None:
        raise ValueError("maternal_origin is required when the child carries one variant copy")
    if c != 1 and maternal_origin is not None:
        raise ValueError("maternal_origin is only meaningful when the child carries one variant copy")
    return _penetrance_value(
        params.delta, params.r1, params.r2, params.r_im, params.s1, params.s2, m, c, maternal_origin
    )


def pair_penetrance(params: RiskParameters, m: int, c: int) -> float:
    """Disease probability shared by every father-compatible triad of an (m, c) pair.

    For (m, c) != (1, 1) the penetrance does not depend on the father:
    a heterozygous child of a homozygous mother has a determined allele
    origin.  The doubly heterozygous pair has no common penetrance and
    raises ValueError.
    """
    if (m, c) == (1, 1):
        raise ValueError("the doubly heterozygous (m,c)=(1,1) pair has no father-free penetrance")
    origin = (m == 2) if c == 1 else None
    return penetrance(params, m, c, origin)


@dataclass(frozen=True, eq=False)
class MatingTypeDistribution:
    """Population distribution mu[m, f] over parental genotype-score pairs.

    Rows index the mother's score, columns the father's.  Entries are
    non-negative and sum to 1 within 1e-12; mu[m, f] need not equal
    mu[f, m].
    """

    mu: np.ndarray

    def __post_init__(self):
        arr = np.array(self.mu, dtype=float)
        if arr.shape != (3, 3):
            raise ValueError(f"mating table must be 3x3, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
            raise ValueError("mating probabilities must be finite and non-negative")
        if abs(float(arr.sum()) - 1.0) > 1e-12:
            raise ValueError(f"mating probabilities must sum to 1, got {arr.sum()!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "mu", arr)

    @classmethod
    def from_margins(cls, mother_probs, father_probs) -> "MatingTypeDistribution":
        """Product distribution of independent maternal and paternal genotypes."""
        return cls(np.outer(np.asarray(mother_probs, dtype=float), np.asarray(father_probs, dtype=float)))

    def prob(self, m: int, f: int) -> float:
        return float(self.mu[m, f])


def triad_joint_probability(
    params: RiskParameters, mu: MatingTypeDistribution, triad: TriadType, affected: bool
) -> float:
    """Joint probability of the triad's genotypes and the child's disease status.

    The mating probability multiplies the Mendelian branch weights; the
    doubly heterozygous-child type averages its two equally likely allele
    origins.
    """
    total = 0.0
    for weight, origin in triad.branches:
        risk = _penetrance_value(
            params.delta, params.r1, params.r2, params.r_im, params.s1, params.s2,
            triad.m, triad.c, origin,
        )
        total += weight * (risk if affected else 1.0 - risk)
    return mu.prob(triad.m, triad.f) * total


def pair_joint_probability(
    params: RiskParameters, mu: MatingTypeDistribution, pair: PairType, affected: bool
) -> float:
    """Joint probability of the pair's genotypes and disease status.

    Equals the sum over the triad types compatible with the unobserved
    father.
    """
    return sum(
        triad_joint_probability(params, mu, TRIAD_TYPES[i - 1], affected)
        for i in pair.triad_indices
    )


@dataclass(frozen=True, eq=False)
class JointProbabilityTable:
    """Joint probabilities of disease status and family genotypes, canonical order."""

    triad_case: np.ndarray
    triad_control: np.ndarray
    pair_case: np.ndarray
    pair_control: np.ndarray

    def __post_init__(self):
        for name in ("triad_case", "triad_control", "pair_case", "pair_control"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def prevalence(self) -> float:
        """Population disease probability implied by the table."""
        return float(self.triad_case.sum())


def joint_probability_table(
    params: RiskParameters, mu: MatingTypeDistribution
) -> JointProbabilityTable:
    return JointProbabilityTable(
        triad_case=[triad_joint_probability(params, mu, t, True) for t in TRIAD_TYPES],
        triad_control=[triad_joint_probability(params, mu, t, False) for t in TRIAD_TYPES],
        pair_case=[pair_joint_probability(params, mu, p, True) for p in PAIR_TYPES],
        pair_control=[pair_joint_probability(params, mu, p, False) for p in PAIR_TYPES],
    )


def implied_prevalence(params: RiskParameters, mu: MatingTypeDistribution) -> float:
    return sum(triad_joint_probability(params, mu, t, True) for t in TRIAD_TYPES)


def solve_phenocopy(
    mu: MatingTypeDistribution,
    prevalence: float,
    *,
    r1: float = 1.0,
    r2: float = 1.0,
    r_im: float = 1.0,
    s1: float = 1.0,
    s2: float = 1.0,
) -> RiskParameters:
    """Phenocopy rate that makes the population prevalence exact, as full parameters.

    The summed case probabilities are linear in delta, so delta equals
    the prevalence divided by the mating- and transmission-weighted sum
    of the relative-risk products.  Raises FeasibilityError when the
    solved rate leaves (0, 1) or pushes some family type's disease
    probability to 1.
    """
    if not (0.0 < prevalence < 1.0):
        raise ValueError(f"prevalence must be in (0, 1), got {prevalence!r}")
    weighted = 0.0
    for t in TRIAD_TYPES:
        for weight, origin in t.branches:
            weighted += mu.prob(t.m, t.f) * weight * _penetrance_value(
                1.0, r1, r2, r_im, s1, s2, t.m, t.c, origin
            )
    delta = prevalence / weighted
    if not (0.0 < delta < 1.0):
        raise FeasibilityError(
            f"prevalence {prevalence} needs phenocopy rate {delta:.6g} outside (0, 1)",
            cell="phenocopy",
        )
    return RiskParameters(delta=delta, r1=r1, r2=r2, r_im=r_im, s1=s1, s2=s2)
