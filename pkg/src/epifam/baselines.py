"""Reference estimators the partial-likelihood method is compared against.

Both assume mating symmetry: the population probability of an unordered
parental genotype pair does not depend on which parent carries which
score.  That assumption (and, for the pair model, a rare-disease style
approximation for control families) is exactly what makes these methods
fragile when the population violates it, which the experiment harness
demonstrates.

``ll_lrt_*`` fits the 15 case-triad counts with a multinomial whose cell
probabilities are symmetric mating weights times Mendelian transmission
times the relative-risk product (the phenocopy rate cancels in the
normalization).  The mating simplex is profiled out in closed form per
unordered-pair class, leaving a derivative-free search over the log
relative risks only.

``cll_*`` is a best-effort "lite" reconstruction of the constrained
pair-multinomial approach: case/control-mother pairs only, no imprinting
term (r_im pinned at 1), mating symmetry as the constraint, and control
cells modelled by the population pair frequencies regardless of the
child being unaffected.  The published method's allelic-exchangeability
constraint variant is not reproduced; its algebra is not specified in
our source material.  The phenocopy rate does not enter the multinomial
(it cancels by normalization) and is reported via the known-prevalence
identity delta = prevalence / sum(P(m,c) * risk product).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from epifam import model
from epifam._optim import DEFAULT_OPTIONS, FitOptions, OptimResult, maximize
from epifam.counts import CountsTable, triad_label
from epifam.likelihood import (
    DegenerateDataError,
    FitResult,
    Hypothesis,
    TestResult,
    _p_value,
)

__all__ = [
    "SymmetricMatingParams",
    "ll_lrt_cell_probs",
    "ll_lrt_fit",
    "ll_lrt_test",
    "cll_fit",
    "cll_test",
    "cll_drop_11_fit",
    "cll_drop_11_test",
]

UNORDERED_PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
_CLASS_INDEX = {pair: g for g, pair in enumerate(UNORDERED_PAIRS)}
_TRIAD_CLASS = tuple(_CLASS_INDEX[tuple(sorted((t.m, t.f)))] for t in model.TRIAD_TYPES)

_LOG_RISK_BOUND = 8.0
_LOGIT_MATING_BOUND = 12.0
_BOUNDARY_TOL = 1e-3

LL_LRT_RISK_NAMES = ("r1", "r2", "r_im", "s1", "s2")
CLL_RISK_NAMES = ("r1", "r2", "s1", "s2")


@dataclass(frozen=True)
class SymmetricMatingParams:
    """Probabilities of the six unordered parental genotype pairs."""

    probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if len(probs) != 6:
            raise ValueError("six unordered-pair probabilities are required")
        if any(not (math.isfinite(p) and p >= 0.0) for p in probs):
            raise ValueError("unordered-pair probabilities must be finite and non-negative")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError(f"unordered-pair probabilities must sum to 1, got {sum(probs)!r}")

    def to_mating_distribution(self) -> model.MatingTypeDistribution:
        """Induced symmetric mu: unordered mass split equally between orderings."""
        mu = np.zeros((3, 3))
        for (a, b), p in zip(UNORDERED_PAIRS, self.probs):
            if a == b:
                mu[a, a] = p
            else:
                mu[a, b] = p / 2.0
                mu[b, a] = p / 2.0
        return model.MatingTypeDistribution(mu)


def _risk_values(values: Mapping[str, float], names: Sequence[str]) -> tuple[float, ...]:
    return tuple(values[n] for n in names)


def _triad_risk_weight(t: model.TriadType, r1, r2, r_im, s1, s2) -> float:
    """Transmission-weighted relative-risk product of one triad type (phenocopy-free)."""
    return sum(
        w * model._penetrance_value(1.0, r1, r2, r_im, s1, s2, t.m, t.c, origin)
        for w, origin in t.branches
    )


def ll_lrt_cell_probs(risks: Mapping[str, float], mating: SymmetricMatingParams) -> np.ndarray:
    """Case-triad multinomial cell probabilities of the log-linear model."""
    r1, r2, r_im, s1, s2 = _risk_values(risks, LL_LRT_RISK_NAMES)
    mu = mating.to_mating_distribution()
    raw = np.array(
        [mu.prob(t.m, t.f) * _triad_risk_weight(t, r1, r2, r_im, s1, s2) for t in model.TRIAD_TYPES]
    )
    return raw / raw.sum()


def _ordered_split(t: model.TriadType) -> float:
    # an unordered parental pair splits its mass over two orderings
    return 1.0 if t.m == t.f else 0.5


def _ll_lrt_profiled_loglik(counts, class_counts, total, r1, r2, r_im, s1, s2) -> float:
    """Multinomial log-likelihood with the symmetric mating simplex maximized out.

    For fixed risks the per-class mating weights have the closed-form
    maximizer pi_g proportional to n_g / W_g, where W_g sums the
    ordering-split, transmission-weighted risk products of the class's
    cells; the profiled cell probability becomes w_i * n_g / (N * W_g).
    """
    weights = [
        _ordered_split(t) * _triad_risk_weight(t, r1, r2, r_im, s1, s2)
        for t in model.TRIAD_TYPES
    ]
    class_weight = [0.0] * len(UNORDERED_PAIRS)
    for i, w in enumerate(weights):
        class_weight[_TRIAD_CLASS[i]] += w
    total_ll = 0.0
    for i, n in enumerate(counts):
        if n:
            g = _TRIAD_CLASS[i]
            total_ll += n * (math.log(weights[i]) - math.log(class_weight[g]))
    for g, n_g in enumerate(class_counts):
        if n_g:
            total_ll += n_g * math.log(n_g / total)
    return total_ll


def _profiled_mating(counts, class_counts, risks: Mapping[str, float]) -> tuple[float, ...]:
    r1, r2, r_im, s1, s2 = _risk_values(risks, LL_LRT_RISK_NAMES)
    weights = [
        _ordered_split(t) * _triad_risk_weight(t, r1, r2, r_im, s1, s2)
        for t in model.TRIAD_TYPES
    ]
    class_weight = [0.0] * len(UNORDERED_PAIRS)
    for i, w in enumerate(weights):
        class_weight[_TRIAD_CLASS[i]] += w
    raw = [
        (n_g / w_g if n_g else 0.0) for n_g, w_g in zip(class_counts, class_weight)
    ]
    total = sum(raw)
    return tuple(r / total for r in raw)


def _merge_risk_pins(
    hypothesis: Optional[Hypothesis],
    allowed: Sequence[str],
    implied: Optional[Mapping[str, float]] = None,
) -> dict[str, float]:
    """Hypothesis pins restricted to the model's estimable parameters.

    A pin the model already implies structurally (CLL assumes r_im = 1)
    is vacuous and dropped; pinning such a parameter to any other value,
    or leaving no effective pin at all, is an error.
    """
    pins: dict[str, float] = {}
    if hypothesis is not None:
        for name, value in hypothesis.pinned:
            if name in allowed:
                pins[name] = value
            elif implied and name in implied:
                if implied[name] != value:
                    raise ValueError(
                        f"hypothesis {hypothesis.label!r} pins {name}={value}, but this model "
                        f"assumes {name}={implied[name]}"
                    )
            else:
                raise ValueError(
                    f"hypothesis {hypothesis.label!r} pins {name}, which this model does not estimate"
                )
        if not pins:
            raise ValueError(
                f"hypothesis {hypothesis.label!r} pins no parameter this model estimates"
            )
    return pins


def _mating_estimates(probs: Sequence[float]) -> dict[str, float]:
    return {f"mating_{a}_{b}": float(p) for (a, b), p in zip(UNORDERED_PAIRS, probs)}


def ll_lrt_fit(
    case_triad_counts: Sequence[int],
    hypothesis: Optional[Hypothesis] = None,
    *,
    options: FitOptions = DEFAULT_OPTIONS,
    extra_starts: Sequence[Sequence[float]] = (),
) -> FitResult:
    """Maximize the symmetric-mating log-linear likelihood of case triads.

    With ``hypothesis`` given, its parameters are pinned (the null fit).
    The phenocopy rate is not identifiable here and is absent from the
    estimates.
    """
    counts = tuple(int(n) for n in case_triad_counts)
    if len(counts) != len(model.TRIAD_TYPES) or any(n < 0 for n in counts):
        raise ValueError("case_triad_counts must be 15 non-negative counts")
    total = sum(counts)
    if total == 0:
        raise DegenerateDataError("no case triads to fit")
    class_counts = [0] * len(UNORDERED_PAIRS)
    for i, n in enumerate(counts):
        class_counts[_TRIAD_CLASS[i]] += n

    pins = _merge_risk_pins(hypothesis, LL_LRT_RISK_NAMES)
    free = tuple(n for n in LL_LRT_RISK_NAMES if n not in pins)

    def values_from(theta) -> dict[str, float]:
        out = dict.fromkeys(LL_LRT_RISK_NAMES, 1.0)
        out.update(pins)
        for name, t in zip(free, theta):
            out[name] = math.exp(t)
        return out

    def negloglik(theta) -> float:
        v = values_from(theta)
        return -_ll_lrt_profiled_loglik(
            counts, class_counts, total, v["r1"], v["r2"], v["r_im"], v["s1"], v["s2"]
        )

    if free:
        bounds = [(-_LOG_RISK_BOUND, _LOG_RISK_BOUND)] * len(free)
        result = maximize(negloglik, [0.0] * len(free), bounds, options, extra_starts=extra_starts)
    else:
        result = OptimResult(np.zeros(0), -negloglik(()), 0, True)
    estimates = values_from(result.x)
    at_boundary = frozenset(
        name
        for name, t in zip(free, result.x)
        if abs(t) >= _LOG_RISK_BOUND - _BOUNDARY_TOL
    )
    estimates.update(_mating_estimates(_profiled_mating(counts, class_counts, estimates)))
    return FitResult(
        estimates=estimates,
        loglik=result.max_value,
        converged=result.converged,
        iterations=result.iterations,
        free=free,
        at_boundary=at_boundary,
        excluded_cells=tuple(triad_label(i) for i, n in enumerate(counts) if n == 0),
    )


def ll_lrt_test(
    case_triad_counts: Sequence[int],
    hypothesis: Hypothesis,
    *,
    options: FitOptions = DEFAULT_OPTIONS,
) -> TestResult:
    """Likelihood-ratio test in the case-triad log-linear model."""
    null = ll_lrt_fit(case_triad_counts, hypothesis, options=options)
    null_theta = [math.log(null.estimates[n]) for n in LL_LRT_RISK_NAMES]
    full = ll_lrt_fit(case_triad_counts, options=options, extra_starts=[null_theta])
    df = len(hypothesis.pinned)
    statistic = max(0.0, 2.0 * (full.loglik - null.loglik))
    return TestResult(
        hypothesis=hypothesis,
        statistic=statistic,
        df=df,
        p_value=_p_value(statistic, df, hypothesis, full.estimates),
        fit_full=full,
        fit_null=null,
    )


# ---------------------------------------------------------------------------
# constrained pair multinomial ("cll-lite")

# P(m, c) = sum_g coef[j, g] * pi_g for the 7 pair types
_PAIR_COEF = np.zeros((len(model.PAIR_TYPES), len(UNORDERED_PAIRS)))
for _j, _p in enumerate(model.PAIR_TYPES):
    for _f in (0, 1, 2):
        _t = model.transmission_prob(_p.m, _f, _p.c)
        if _t > 0.0:
            _g = _CLASS_INDEX[tuple(sorted((_p.m, _f)))]
            _PAIR_COEF[_j, _g] += _t * (1.0 if _p.m == _f else 0.5)

_PAIR_RISK_EXPONENTS = []  # (e_r1, e_r2, e_s1, e_s2) per pair type, imprinting-free
for _p in model.PAIR_TYPES:
    _PAIR_RISK_EXPONENTS.append((int(_p.c == 1), int(_p.c == 2), int(_p.m == 1), int(_p.m == 2)))


def _pair_risk_factors(r1: float, r2: float, s1: float, s2: float) -> np.ndarray:
    risks = (r1, r2, s1, s2)
    out = np.empty(len(model.PAIR_TYPES))
    for j, exps in enumerate(_PAIR_RISK_EXPONENTS):
        value = 1.0
        for e, risk in zip(exps, risks):
            if e:
                value *= risk
        out[j] = value
    return out


def _softmax_simplex(logits) -> np.ndarray:
    z = np.concatenate(([0.0], np.asarray(logits, dtype=float)))
    z = np.exp(z - z.max())
    return z / z.sum()


def cll_fit(
    pair_counts: CountsTable,
    prevalence: float,
    hypothesis: Optional[Hypothesis] = None,
    *,
    drop_11: bool = False,
    options: FitOptions = DEFAULT_OPTIONS,
    extra_starts: Sequence[Sequence[float]] = (),
) -> FitResult:
    """Fit the constrained pair multinomial to pairs-only counts.

    Case cells are proportional to P(m, c) times the risk product; control
    cells use the population frequencies P(m, c) unchanged (the rare-disease
    style approximation this model is known for).  ``drop_11`` removes the
    doubly heterozygous type from both multinomials.  ``prevalence`` only
    enters the reported phenocopy rate.
    """
    if not pair_counts.is_pairs_only:
        raise ValueError("the pair model needs pairs-only counts (triad totals zero)")
    if not 0.0 < prevalence < 1.0:
        raise ValueError(f"prevalence must be in (0, 1), got {prevalence!r}")
    n1 = np.array(pair_counts.case_pairs, dtype=float)
    n0 = np.array(pair_counts.control_pairs, dtype=float)
    include = np.ones(len(model.PAIR_TYPES), dtype=bool)
    if drop_11:
        include[model.EXCLUDED_PAIR.index - 1] = False
    if (n1[include].sum() + n0[include].sum()) == 0:
        raise DegenerateDataError("no analyzable pair families")

    pins = _merge_risk_pins(hypothesis, CLL_RISK_NAMES, implied={"r_im": 1.0})
    free = tuple(n for n in CLL_RISK_NAMES if n not in pins)
    n_mating = len(UNORDERED_PAIRS) - 1

    def split(theta):
        risks = dict.fromkeys(CLL_RISK_NAMES, 1.0)
        risks.update(pins)
        for name, t in zip(free, theta[: len(free)]):
            risks[name] = math.exp(t)
        return risks, theta[len(free):]

    def negloglik(theta) -> float:
        risks, logits = split(theta)
        pi = _softmax_simplex(logits)
        pop = _PAIR_COEF @ pi
        case_w = pop * _pair_risk_factors(risks["r1"], risks["r2"], risks["s1"], risks["s2"])
        q1 = case_w[include] / case_w[include].sum()
        q0 = pop[include] / pop[include].sum()
        ll = 0.0
        for n, q in ((n1[include], q1), (n0[include], q0)):
            nz = n > 0
            ll += float((n[nz] * np.log(q[nz])).sum())
        return -ll

    bounds = [(-_LOG_RISK_BOUND, _LOG_RISK_BOUND)] * len(free) + [
        (-_LOGIT_MATING_BOUND, _LOGIT_MATING_BOUND)
    ] * n_mating
    x0 = [0.0] * (len(free) + n_mating)
    result = maximize(negloglik, x0, bounds, options, extra_starts=extra_starts)

    risks, logits = split(result.x)
    pi = _softmax_simplex(logits)
    pop = _PAIR_COEF @ pi
    factors = _pair_risk_factors(risks["r1"], risks["r2"], risks["s1"], risks["s2"])
    estimates = {"delta": float(prevalence / (pop * factors).sum()), "r_im": 1.0}
    estimates.update(risks)
    estimates.update(_mating_estimates(pi))
    at_boundary = set()
    for name, t in zip(free, result.x[: len(free)]):
        if abs(t) >= _LOG_RISK_BOUND - _BOUNDARY_TOL:
            at_boundary.add(name)
    if np.any(np.abs(result.x[len(free):]) >= _LOGIT_MATING_BOUND - _BOUNDARY_TOL):
        at_boundary.add("mating")
    excluded = [pair_label_at(j) for j in range(len(model.PAIR_TYPES)) if not include[j]]
    excluded += [
        pair_label_at(j)
        for j in range(len(model.PAIR_TYPES))
        if include[j] and n1[j] == 0 and n0[j] == 0
    ]
    return FitResult(
        estimates=estimates,
        loglik=result.max_value,
        converged=result.converged,
        iterations=result.iterations,
        free=free,
        at_boundary=frozenset(at_boundary),
        excluded_cells=tuple(excluded),
    )


def pair_label_at(position: int) -> str:
    p = model.PAIR_TYPES[position]
    return f"pair_{p.m}_{p.c}"


def cll_test(
    pair_counts: CountsTable,
    prevalence: float,
    hypothesis: Hypothesis,
    *,
    drop_11: bool = False,
    options: FitOptions = DEFAULT_OPTIONS,
) -> TestResult:
    """Likelihood-ratio test in the constrained pair multinomial."""
    null = cll_fit(pair_counts, prevalence, hypothesis, drop_11=drop_11, options=options)
    full = cll_fit(
        pair_counts, prevalence, drop_11=drop_11, options=options, extra_starts=[_cll_theta(null)]
    )
    df = len(_merge_risk_pins(hypothesis, CLL_RISK_NAMES, implied={"r_im": 1.0}))
    statistic = max(0.0, 2.0 * (full.loglik - null.loglik))
    return TestResult(
        hypothesis=hypothesis,
        statistic=statistic,
        df=df,
        p_value=_p_value(statistic, df, hypothesis, full.estimates),
        fit_full=full,
        fit_null=null,
    )


def cll_drop_11_fit(pair_counts: CountsTable, prevalence: float, hypothesis=None, **kwargs) -> FitResult:
    """cll_fit with the doubly heterozygous pair type removed from both multinomials."""
    return cll_fit(pair_counts, prevalence, hypothesis, drop_11=True, **kwargs)


def cll_drop_11_test(pair_counts: CountsTable, prevalence: float, hypothesis: Hypothesis, **kwargs) -> TestResult:
    return cll_test(pair_counts, prevalence, hypothesis, drop_11=True, **kwargs)


def ll_lrt_fit_and_test(
    case_triad_counts: Sequence[int],
    hypotheses: Sequence[Hypothesis],
    *,
    options: FitOptions = DEFAULT_OPTIONS,
) -> tuple[FitResult, dict[str, TestResult]]:
    """One full log-linear fit plus tests of several hypotheses against it.

    The null solutions seed the full-model search, keeping every
    statistic non-negative up to optimizer tolerance.
    """
    nulls = {h.label: ll_lrt_fit(case_triad_counts, h, options=options) for h in hypotheses}
    extra = [
        [math.log(nulls[h.label].estimates[n]) for n in LL_LRT_RISK_NAMES] for h in hypotheses
    ]
    full = ll_lrt_fit(case_triad_counts, options=options, extra_starts=extra)
    tests = {}
    for h in hypotheses:
        statistic = max(0.0, 2.0 * (full.loglik - nulls[h.label].loglik))
        df = len(h.pinned)
        tests[h.label] = TestResult(
            hypothesis=h,
            statistic=statistic,
            df=df,
            p_value=_p_value(statistic, df, h, full.estimates),
            fit_full=full,
            fit_null=nulls[h.label],
        )
    return full, tests


def _cll_theta(fit_result: FitResult) -> list[float]:
    theta = [math.log(fit_result.estimates[n]) for n in CLL_RISK_NAMES]
    mating = [fit_result.estimates[f"mating_{a}_{b}"] for a, b in UNORDERED_PAIRS]
    base = math.log(max(mating[0], 1e-300))
    return theta + [math.log(max(p, 1e-300)) - base for p in mating[1:]]


def cll_fit_and_test(
    pair_counts: CountsTable,
    prevalence: float,
    hypotheses: Sequence[Hypothesis],
    *,
    drop_11: bool = False,
    options: FitOptions = DEFAULT_OPTIONS,
) -> tuple[FitResult, dict[str, TestResult]]:
    """One full pair-multinomial fit plus tests of several hypotheses against it."""
    nulls = {
        h.label: cll_fit(pair_counts, prevalence, h, drop_11=drop_11, options=options)
        for h in hypotheses
    }
    extra = [_cll_theta(nulls[h.label]) for h in hypotheses]
    full = cll_fit(pair_counts, prevalence, drop_11=drop_11, options=options, extra_starts=extra)
    tests = {}
    for h in hypotheses:
        statistic = max(0.0, 2.0 * (full.loglik - nulls[h.label].loglik))
        df = len(_merge_risk_pins(h, CLL_RISK_NAMES, implied={"r_im": 1.0}))
        tests[h.label] = TestResult(
            hypothesis=h,
            statistic=statistic,
            df=df,
            p_value=_p_value(statistic, df, h, full.estimates),
            fit_full=full,
            fit_null=nulls[h.label],
        )
    return full, tests
