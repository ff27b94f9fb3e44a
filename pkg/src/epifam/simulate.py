"""Family-data simulator: population genotype models, Mendelian offspring,
disease assignment, case-control ascertainment and tabulation.

Parents are drawn independently per sex from a genotype distribution
parameterized by the variant allele frequency and a per-sex inbreeding
coefficient, so a single population's mating-type distribution is a
product measure.  Mixtures of such components produce non-product
(possibly asymmetric) marginal mating distributions and may carry
component-specific disease prevalences.

Ascertainment draws one shared stream of families, keeping each as a
case or control candidate according to its realized disease status until
both quotas fill, then masks fathers independently.  All randomness goes
through a caller-supplied numpy Generator (PCG64 by default); identical
seeds give bit-identical datasets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from epifam import model
from epifam.counts import CountsTable

RNG_ALGORITHM = "PCG64"  # numpy default_rng; recorded in run manifests

_BATCH = 4096
_MAX_DRAWS = 200_000_000


class ConfigurationError(ValueError):
    """The simulation setup cannot produce the requested data."""


class DataError(ValueError):
    """A family record is inconsistent with Mendelian inheritance."""


def genotype_distribution(vaf: float, zeta: float = 0.0) -> np.ndarray:
    """Genotype-score probabilities at allele frequency ``vaf`` with inbreeding ``zeta``.

    zeta = 0 gives the random-mating (Hardy-Weinberg) frequencies; larger
    zeta shifts mass from heterozygotes to homozygotes.
    """
    if not 0.0 < vaf < 1.0:
        raise ValueError(f"variant allele frequency must be in (0, 1), got {vaf!r}")
    if not 0.0 <= zeta < 1.0:
        raise ValueError(f"inbreeding coefficient must be in [0, 1), got {zeta!r}")
    other = 1.0 - vaf
    return np.array(
        [
            other * other * (1.0 - zeta) + other * zeta,
            2.0 * vaf * other * (1.0 - zeta),
            vaf * vaf * (1.0 - zeta) + vaf * zeta,
        ]
    )


@dataclass(frozen=True)
class PopulationComponent:
    """One homogeneous subpopulation.

    ``prevalence`` optionally overrides the study-wide disease prevalence
    for families from this component (substructure scenarios where the
    subpopulations differ in disease risk).
    """

    vaf: float
    zeta_male: float = 0.0
    zeta_female: float = 0.0
    weight: float = 1.0
    prevalence: Optional[float] = None

    def __post_init__(self):
        genotype_distribution(self.vaf, self.zeta_male)
        genotype_distribution(self.vaf, self.zeta_female)
        if not self.weight > 0.0:
            raise ValueError("component weight must be positive")
        if self.prevalence is not None and not 0.0 < self.prevalence < 1.0:
            raise ValueError("component prevalence must be in (0, 1)")

    @property
    def mother_probs(self) -> np.ndarray:
        return genotype_distribution(self.vaf, self.zeta_female)

    @property
    def father_probs(self) -> np.ndarray:
        return genotype_distribution(self.vaf, self.zeta_male)

    def mating_distribution(self) -> model.MatingTypeDistribution:
        return model.MatingTypeDistribution.from_margins(self.mother_probs, self.father_probs)


@dataclass(frozen=True)
class PopulationModel:
    """A population: one component or a weighted mixture of components."""

    components: tuple[PopulationComponent, ...]

    def __post_init__(self):
        if not self.components:
            raise ValueError("a population needs at least one component")
        object.__setattr__(self, "components", tuple(self.components))
        total = sum(c.weight for c in self.components)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"component weights must sum to 1, got {total!r}")

    @classmethod
    def hwe(cls, vaf: float) -> "PopulationModel":
        return cls((PopulationComponent(vaf=vaf),))

    @classmethod
    def inbred(cls, vaf: float, zeta_male: float, zeta_female: float) -> "PopulationModel":
        return cls((PopulationComponent(vaf=vaf, zeta_male=zeta_male, zeta_female=zeta_female),))

    def mating_distribution(self) -> model.MatingTypeDistribution:
        """Marginal mating-type distribution (non-product for true mixtures)."""
        mu = np.zeros((3, 3))
        for c in self.components:
            mu += c.weight * np.outer(c.mother_probs, c.father_probs)
        return model.MatingTypeDistribution(mu)


def mixture_population(components: Iterable[PopulationComponent]) -> PopulationModel:
    """Population drawing each family's component by weight, then sampling within it."""
    return PopulationModel(tuple(components))


@dataclass(frozen=True)
class SimulationModel:
    """A population with its resolved disease model.

    All components share the relative risks; each carries its own
    phenocopy rate, solved from that component's prevalence.  The
    estimators are handed ``prevalence``, the marginal disease
    probability across components.
    """

    population: PopulationModel
    component_params: tuple[model.RiskParameters, ...]
    prevalence: float

    def __post_init__(self):
        if len(self.component_params) != len(self.population.components):
            raise ValueError("one parameter set per population component is required")
        first = self.component_params[0]
        for params in self.component_params[1:]:
            if any(getattr(params, n) != getattr(first, n) for n in model.RISK_NAMES):
                raise ValueError("all components must share the same relative risks")

    @classmethod
    def from_prevalence(
        cls,
        population: PopulationModel,
        prevalence: float,
        *,
        r1: float = 1.0,
        r2: float = 1.0,
        r_im: float = 1.0,
        s1: float = 1.0,
        s2: float = 1.0,
    ) -> "SimulationModel":
        """Solve each component's phenocopy rate from its prevalence.

        Components without their own prevalence use the study-wide value.
        Raises FeasibilityError when any component's solved rate is
        infeasible.
        """
        params = []
        marginal = 0.0
        for comp in population.components:
            target = comp.prevalence if comp.prevalence is not None else prevalence
            params.append(
                model.solve_phenocopy(
                    comp.mating_distribution(), target, r1=r1, r2=r2, r_im=r_im, s1=s1, s2=s2
                )
            )
            marginal += comp.weight * target
        return cls(population, tuple(params), marginal)

    @property
    def risks(self) -> dict[str, float]:
        first = self.component_params[0]
        return {name: getattr(first, name) for name in model.RISK_NAMES}

    def joint_table(self) -> model.JointProbabilityTable:
        """Mixture-weighted joint probabilities of disease and family genotypes."""
        tc = np.zeros(len(model.TRIAD_TYPES))
        tu = np.zeros(len(model.TRIAD_TYPES))
        pc = np.zeros(len(model.PAIR_TYPES))
        pu = np.zeros(len(model.PAIR_TYPES))
        for comp, params in zip(self.population.components, self.component_params):
            table = model.joint_probability_table(params, comp.mating_distribution())
            tc += comp.weight * table.triad_case
            tu += comp.weight * table.triad_control
            pc += comp.weight * table.pair_case
            pu += comp.weight * table.pair_control
        return model.JointProbabilityTable(tc, tu, pc, pu)


@dataclass(frozen=True)
class FamilyRecord:
    """One simulated nuclear family; ``father`` is None when masked.

    ``maternal_origin`` tracks which parent transmitted a heterozygous
    child's variant allele.  It is simulator bookkeeping: tabulation and
    export never expose it to the estimators.
    """

    mother: int
    father: Optional[int]
    child: int
    affected: bool
    maternal_origin: Optional[bool] = None


@dataclass(frozen=True)
class AscertainmentSpec:
    """Sampling quotas and the father-missingness mechanism."""

    case_families: int
    control_families: int
    missing_father_prob: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.case_families <= 0 or self.control_families <= 0:
            raise ValueError("family quotas must be positive")
        if not 0.0 <= self.missing_father_prob <= 1.0:
            raise ValueError("missing-father probability must be in [0, 1]")


def _component_arrays(sim: SimulationModel):
    comps = sim.population.components
    weights = np.array([c.weight for c in comps])
    mother_cdf = np.cumsum(np.stack([c.mother_probs for c in comps]), axis=1)
    father_cdf = np.cumsum(np.stack([c.father_probs for c in comps]), axis=1)
    deltas = np.array([p.delta for p in sim.component_params])
    return weights, mother_cdf, father_cdf, deltas


def _sample_batch(sim: SimulationModel, n: int, rng: np.random.Generator, arrays):
    weights, mother_cdf, father_cdf, deltas = arrays
    k = len(weights)
    comp = rng.choice(k, size=n, p=weights) if k > 1 else np.zeros(n, dtype=int)
    mother = (rng.random(n)[:, None] >= mother_cdf[comp]).sum(axis=1)
    father = (rng.random(n)[:, None] >= father_cdf[comp]).sum(axis=1)
    from_mother = rng.random(n) < mother / 2.0
    from_father = rng.random(n) < father / 2.0
    child = from_mother.astype(int) + from_father.astype(int)
    risks = sim.risks
    pen = deltas[comp].copy()
    pen[child == 1] *= risks["r1"]
    pen[(child == 1) & from_mother] *= risks["r_im"]
    pen[child == 2] *= risks["r2"]
    pen[mother == 1] *= risks["s1"]
    pen[mother == 2] *= risks["s2"]
    affected = rng.random(n) < pen
    return mother, father, child, from_mother, affected


def sample_family(sim: SimulationModel, rng: np.random.Generator) -> FamilyRecord:
    """Draw one complete family: parents, Mendelian child, disease status."""
    mother, father, child, from_mother, affected = _sample_batch(sim, 1, rng, _component_arrays(sim))
    c = int(child[0])
    return FamilyRecord(
        mother=int(mother[0]),
        father=int(father[0]),
        child=c,
        affected=bool(affected[0]),
        maternal_origin=bool(from_mother[0]) if c == 1 else None,
    )


def mask_fathers(
    records: Sequence[FamilyRecord], prob: float, rng: np.random.Generator
) -> tuple[FamilyRecord, ...]:
    """Independently drop each family's paternal genotype with the given probability."""
    if not 0.0 <= prob <= 1.0:
        raise ValueError("missing-father probability must be in [0, 1]")
    if prob == 0.0:
        return tuple(records)
    mask = rng.random(len(records)) < prob
    return tuple(
        FamilyRecord(r.mother, None, r.child, r.affected, r.maternal_origin) if hit else r
        for r, hit in zip(records, mask)
    )


def ascertain(
    sim: SimulationModel, spec: AscertainmentSpec, rng: Optional[np.random.Generator] = None
) -> tuple[FamilyRecord, ...]:
    """Sample families until the case and control quotas are both met.

    Families come from one shared stream in draw order; surplus families
    of a filled arm are discarded.  Fathers are then masked independently
    with ``spec.missing_father_prob``.  With ``rng`` omitted, a fresh
    PCG64 generator seeded with ``spec.rng_seed`` is used.
    """
    if rng is None:
        rng = np.random.default_rng(spec.rng_seed)
    arrays = _component_arrays(sim)
    kept: list[tuple[int, int, int, int, bool, bool]] = []
    need_case = spec.case_families
    need_control = spec.control_families
    drawn = 0
    position = 0
    while need_case > 0 or need_control > 0:
        if drawn >= _MAX_DRAWS:
            raise ConfigurationError(
                f"quotas not reached after {drawn} draws; "
                "the disease model makes one arm vanishingly rare"
            )
        n = min(_BATCH, _MAX_DRAWS - drawn)
        mother, father, child, from_mother, affected = _sample_batch(sim, n, rng, arrays)
        drawn += n
        for i in range(n):
            if affected[i]:
                if need_case == 0:
                    continue
                need_case -= 1
            else:
                if need_control == 0:
                    continue
                need_control -= 1
            kept.append(
                (position + i, int(mother[i]), int(father[i]), int(child[i]),
                 bool(from_mother[i]), bool(affected[i]))
            )
            if need_case == 0 and need_control == 0:
                break
        position += n
    kept.sort()  # stream order
    records = tuple(
        FamilyRecord(
            mother=m, father=f, child=c, affected=d,
            maternal_origin=fm if c == 1 else None,
        )
        for _, m, f, c, fm, d in kept
    )
    return mask_fathers(records, spec.missing_father_prob, rng)


def tabulate(records: Iterable[FamilyRecord]) -> CountsTable:
    """Count families into the canonical triad/pair table.

    Allele-origin bookkeeping is discarded.  A record with genotypes no
    Mendelian family can produce raises DataError naming its position.
    """
    case_triads = [0] * len(model.TRIAD_TYPES)
    control_triads = [0] * len(model.TRIAD_TYPES)
    case_pairs = [0] * len(model.PAIR_TYPES)
    control_pairs = [0] * len(model.PAIR_TYPES)
    for k, rec in enumerate(records):
        if rec.father is None:
            pair = model.PAIR_BY_GENOTYPES.get((rec.mother, rec.child))
            if pair is None:
                raise DataError(
                    f"family {k}: mother/child genotypes ({rec.mother},{rec.child}) are incompatible"
                )
            (case_pairs if rec.affected else control_pairs)[pair.index - 1] += 1
        else:
            triad = model.TRIAD_BY_GENOTYPES.get((rec.mother, rec.father, rec.child))
            if triad is None:
                raise DataError(
                    f"family {k}: genotypes ({rec.mother},{rec.father},{rec.child}) are incompatible"
                )
            (case_triads if rec.affected else control_triads)[triad.index - 1] += 1
    return CountsTable.from_cells(case_triads, control_triads, case_pairs, control_pairs)
