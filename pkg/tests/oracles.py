"""Independent brute-force implementations used as test oracles.

Nothing here touches the package's type tables or probability code: the
joint distribution is rebuilt by enumerating which parental alleles were
transmitted, family type orderings are derived lexicographically, and
conditional probabilities come straight from the joint table.  Expected
values asserted in tests are computed with these functions.
"""

from __future__ import annotations

import numpy as np


def triad_order() -> list[tuple[int, int, int]]:
    """All Mendelian-reachable (m, f, c), lexicographically sorted."""
    reachable = set()
    for m in (0, 1, 2):
        for f in (0, 1, 2):
            for a_m in (0, 1):
                for a_f in (0, 1):
                    if _allele_prob(m, a_m) > 0 and _allele_prob(f, a_f) > 0:
                        reachable.add((m, f, a_m + a_f))
    return sorted(reachable)


def pair_order() -> list[tuple[int, int]]:
    return sorted({(m, c) for m, _, c in triad_order()})


def _allele_prob(genotype: int, allele: int) -> float:
    p = genotype / 2.0
    return p if allele == 1 else 1.0 - p


def _penetrance(params, m: int, c: int, from_mother: bool) -> float:
    delta, r1, r2, r_im, s1, s2 = params
    value = delta
    if c == 1:
        value *= r1
        if from_mother:
            value *= r_im
    elif c == 2:
        value *= r2
    if m == 1:
        value *= s1
    elif m == 2:
        value *= s2
    return value


def joint_tables(params, mu) -> dict:
    """Joint probabilities of disease status and genotypes by allele enumeration.

    ``params`` is the (delta, r1, r2, r_im, s1, s2) tuple; ``mu`` a 3x3
    array of mating probabilities indexed [mother, father].  Returns
    triad and pair case/control vectors in lexicographic type order.
    """
    mu = np.asarray(mu, dtype=float)
    case: dict[tuple, float] = {}
    control: dict[tuple, float] = {}
    for m in (0, 1, 2):
        for f in (0, 1, 2):
            for a_m in (0, 1):
                for a_f in (0, 1):
                    weight = mu[m, f] * _allele_prob(m, a_m) * _allele_prob(f, a_f)
                    if _allele_prob(m, a_m) == 0 or _allele_prob(f, a_f) == 0:
                        continue
                    c = a_m + a_f
                    pen = _penetrance(params, m, c, bool(a_m))
                    key = (m, f, c)
                    case[key] = case.get(key, 0.0) + weight * pen
                    control[key] = control.get(key, 0.0) + weight * (1.0 - pen)
    triads = triad_order()
    pairs = pair_order()
    pair_case = {k: 0.0 for k in pairs}
    pair_control = {k: 0.0 for k in pairs}
    for (m, f, c), value in case.items():
        pair_case[(m, c)] += value
    for (m, f, c), value in control.items():
        pair_control[(m, c)] += value
    return {
        "triad_order": triads,
        "pair_order": pairs,
        "triad_case": np.array([case[k] for k in triads]),
        "triad_control": np.array([control[k] for k in triads]),
        "pair_case": np.array([pair_case[k] for k in pairs]),
        "pair_control": np.array([pair_control[k] for k in pairs]),
    }


def conditional_case_probs(
    params, mu, prevalence: float, n_case: int, n_control: int
) -> dict:
    """Per-type probabilities that a family is a case family.

    Built from the joint table: n1 * P(type | affected) against
    n0 * P(type | unaffected), with the disease probability fixed at the
    externally known ``prevalence``.
    """
    tables = joint_tables(params, mu)
    out = {}
    for kind in ("triad", "pair"):
        a = n_case * tables[f"{kind}_case"] / prevalence
        b = n_control * tables[f"{kind}_control"] / (1.0 - prevalence)
        out[f"{kind}_order"] = tables[f"{kind}_order"]
        with np.errstate(invalid="ignore"):
            out[kind] = np.where(a + b > 0, a / (a + b), np.nan)
    return out


def loglik_by_cells(counts_map: dict, case_probs: dict) -> float:
    """Plain summation of binomial kernels over labelled cells.

    ``counts_map`` maps cell keys to (n_case, n_control); ``case_probs``
    maps the same keys to the case probability.
    """
    total = 0.0
    for key, (n1, n0) in counts_map.items():
        p = case_probs[key]
        if n1:
            total += n1 * np.log(p)
        if n0:
            total += n0 * np.log(1.0 - p)
    return float(total)
