"""Partial likelihood for mixed triad/pair case-control family samples.

Within each familial genotype configuration, the split of families into
cases and controls follows a renormalized binomial whose success
probability involves only the disease-model parameters, the known
population prevalence and the design totals; the mating-type
probabilities cancel between case and control families of the same
configuration.  Maximizing the product of those binomial kernels
therefore estimates the risk parameters without modelling the mating
distribution at all, for triads-only, pairs-only or mixed samples.

The doubly heterozygous mother-child pair type is the one stratum where
the mating probabilities do not cancel; its families contribute no
binomial kernel to the likelihood.  The design totals in the cell
probabilities are the full sample sizes (including that stratum's
families), exactly as the renormalized binomial construction defines
them; replacing them with analyzed-only totals would bias the estimator
whenever case and control families occupy the excluded stratum at
different rates.

Likelihood-ratio tests compare the maximized partial log-likelihood of
the full model against a null with some relative risks pinned to 1,
referred to a chi-square with as many degrees of freedom as pinned
parameters.  The chi-square reference is used as-is even when the
phenocopy-rate estimate sits near its boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from scipy.stats import chi2

from epifam import model
from epifam._optim import DEFAULT_OPTIONS, FitOptions, maximize
from epifam.counts import CountsTable, pair_label, triad_label

__all__ = [
    "DegenerateDataError",
    "Hypothesis",
    "FitResult",
    "TestResult",
    "association",
    "imprinting",
    "maternal",
    "hypothesis_from_label",
    "cell_case_prob_triad",
    "cell_case_prob_pair",
    "partial_loglik",
    "fit",
    "lrt",
    "fit_and_test",
    "FitOptions",
    "DEFAULT_OPTIONS",
]

HYPOTHESIS_LABELS = ("association", "imprinting", "maternal")

_LOG_RISK_BOUND = 8.0  # relative risks searched within exp(+-8)
_LOGIT_DELTA_BOUND = 30.0
_BOUNDARY_TOL = 1e-3
_PRODUCT_BOUNDARY_TOL = 1e-6


class DegenerateDataError(ValueError):
    """The counts carry no information about any parameter."""


# ---------------------------------------------------------------------------
# distinct penetrance products
#
# Every family type's case probability is one of eight products of the
# parameters (or, for the doubly heterozygous triad, the equal-weight
# average of two of them).  The mapping is derived from the model tables
# so the two stay consistent by construction.

_EXPONENTS_TO_PRODUCT: dict[tuple[int, int, int, int, int], int] = {}


def _branch_exponents(m: int, c: int, origin: Optional[bool]) -> tuple[int, int, int, int, int]:
    return (
        int(c == 1),
        int(c == 2),
        int(c == 1 and bool(origin)),
        int(m == 1),
        int(m == 2),
    )


def _product_id(exponents: tuple[int, int, int, int, int]) -> int:
    return _EXPONENTS_TO_PRODUCT.setdefault(exponents, len(_EXPONENTS_TO_PRODUCT))


# terms[i] = ((weight, product), ...) with weights summing to 1 per type
_TRIAD_TERMS: list[tuple[tuple[float, int], ...]] = []
for _t in model.TRIAD_TYPES:
    _total = _t.transmission
    _TRIAD_TERMS.append(
        tuple((w / _total, _product_id(_branch_exponents(_t.m, _t.c, o))) for w, o in _t.branches)
    )
_PAIR_TERMS: list[Optional[tuple[tuple[float, int], ...]]] = []
for _p in model.PAIR_TYPES:
    if _p.excluded:
        _PAIR_TERMS.append(None)
    else:
        _origin = (_p.m == 2) if _p.c == 1 else None
        _PAIR_TERMS.append(((1.0, _product_id(_branch_exponents(_p.m, _p.c, _origin))),))

_N_PRODUCTS = len(_EXPONENTS_TO_PRODUCT)
_PRODUCT_EXPONENTS = [None] * _N_PRODUCTS
for _e, _i in _EXPONENTS_TO_PRODUCT.items():
    _PRODUCT_EXPONENTS[_i] = _e


def _products(delta: float, r1: float, r2: float, r_im: float, s1: float, s2: float):
    risks = (r1, r2, r_im, s1, s2)
    out = []
    for exps in _PRODUCT_EXPONENTS:
        value = delta
        for e, risk in zip(exps, risks):
            if e:
                value *= risk
        out.append(value)
    return out


# ---------------------------------------------------------------------------
# cell design: the informative strata of one counts table


def _build_cells(counts: CountsTable, prevalence: float):
    """Informative strata as (n_case, n_control, case_scale, control_scale, terms).

    Strata sharing the same section scales and penetrance product merge
    (their case probabilities are identical).  Zero-count strata drop out.
    """
    k1 = prevalence
    k0 = 1.0 - prevalence
    cells = []
    a_t = counts.total_case_triads / k1
    b_t = counts.total_control_triads / k0
    merged: dict[tuple, list[int]] = {}
    for i, terms in enumerate(_TRIAD_TERMS):
        n1 = counts.case_triads[i]
        n0 = counts.control_triads[i]
        if n1 == 0 and n0 == 0:
            continue
        entry = merged.setdefault(terms, [0, 0])
        entry[0] += n1
        entry[1] += n0
    for terms, (n1, n0) in merged.items():
        cells.append((n1, n0, a_t, b_t, terms))
    a_p = counts.total_case_pairs / k1
    b_p = counts.total_control_pairs / k0
    for j, terms in enumerate(_PAIR_TERMS):
        if terms is None:
            continue
        n1 = counts.case_pairs[j]
        n0 = counts.control_pairs[j]
        if n1 == 0 and n0 == 0:
            continue
        cells.append((n1, n0, a_p, b_p, terms))
    return cells


def _loglik_cells(cells, delta, r1, r2, r_im, s1, s2) -> float:
    prods = _products(delta, r1, r2, r_im, s1, s2)
    if max(prods) >= 1.0:
        return -math.inf
    total = 0.0
    for n1, n0, a_scale, b_scale, terms in cells:
        if len(terms) == 1:
            q = prods[terms[0][1]]
        else:
            q = 0.0
            for w, pid in terms:
                q += w * prods[pid]
        a = a_scale * q
        b = b_scale * (1.0 - q)
        s = a + b
        if n1:
            total += n1 * math.log(a / s)
        if n0:
            total += n0 * math.log(b / s)
    return total


def _excluded_cell_labels(counts: CountsTable) -> tuple[str, ...]:
    labels = []
    if counts.total_case_triads or counts.total_control_triads:
        for i in range(len(model.TRIAD_TYPES)):
            if counts.case_triads[i] == 0 and counts.control_triads[i] == 0:
                labels.append(triad_label(i))
    has_pairs = counts.total_case_pairs or counts.total_control_pairs
    for j, p in enumerate(model.PAIR_TYPES):
        if p.excluded:
            if has_pairs or counts.case_pairs[j] or counts.control_pairs[j]:
                labels.append(pair_label(j))
        elif has_pairs and counts.case_pairs[j] == 0 and counts.control_pairs[j] == 0:
            labels.append(pair_label(j))
    return tuple(labels)


# ---------------------------------------------------------------------------
# single-cell case probabilities (the building blocks of the likelihood)


def _case_prob(penetrance_case: float, prevalence: float, n_case: int, n_control: int) -> float:
    a = n_case * penetrance_case / prevalence
    b = n_control * (1.0 - penetrance_case) / (1.0 - prevalence)
    return a / (a + b)


def cell_case_prob_triad(
    params: model.RiskParameters,
    prevalence: float,
    n_case_triads: int,
    n_control_triads: int,
    triad: model.TriadType,
) -> float:
    """Probability that a triad family of this genotype type is a case family.

    Free of the mating-type distribution by construction: the mating and
    transmission weights cancel between the case and control arms.
    """
    _check_prevalence(prevalence)
    if n_case_triads + n_control_triads <= 0:
        raise ValueError("at least one triad family is required")
    q = 0.0
    for weight, origin in triad.branches:
        q += (weight / triad.transmission) * model._penetrance_value(
            params.delta, params.r1, params.r2, params.r_im, params.s1, params.s2,
            triad.m, triad.c, origin,
        )
    return _case_prob(q, prevalence, n_case_triads, n_control_triads)


def cell_case_prob_pair(
    params: model.RiskParameters,
    prevalence: float,
    n_case_pairs: int,
    n_control_pairs: int,
    pair: model.PairType,
) -> float:
    """Probability that a mother-child pair family of this type is a case family.

    Rejects the doubly heterozygous pair, whose case probability cannot
    be separated from the mating distribution.
    """
    if pair.excluded:
        raise ValueError("the (m,c)=(1,1) pair type is excluded from the partial likelihood")
    _check_prevalence(prevalence)
    if n_case_pairs + n_control_pairs <= 0:
        raise ValueError("at least one pair family is required")
    q = model.pair_penetrance(params, pair.m, pair.c)
    return _case_prob(q, prevalence, n_case_pairs, n_control_pairs)


def _check_prevalence(prevalence: float) -> None:
    if not (isinstance(prevalence, (int, float)) and 0.0 < prevalence < 1.0):
        raise ValueError(f"prevalence must be in (0, 1), got {prevalence!r}")


def partial_loglik(params: model.RiskParameters, counts: CountsTable, prevalence: float) -> float:
    """Partial log-likelihood of the counts at the given parameters.

    Sums the binomial kernels over all triad strata and the analyzed pair
    strata; the doubly heterozygous pair stratum and zero-count strata
    contribute nothing.  A stratum whose case probability is 0 or 1
    against a nonzero opposing count yields -inf rather than an error.
    """
    _check_prevalence(prevalence)
    cells = _build_cells(counts, prevalence)
    return _loglik_cells(
        cells, params.delta, params.r1, params.r2, params.r_im, params.s1, params.s2
    )


# ---------------------------------------------------------------------------
# hypotheses


@dataclass(frozen=True)
class Hypothesis:
    """A null hypothesis pinning some relative risks to their no-effect value.

    ``sided`` is meaningful only for the single-parameter imprinting
    test: "greater"/"less" halve the chi-square p-value on the
    hypothesized side of r_im = 1.
    """

    label: str
    pinned: tuple[tuple[str, float], ...]
    sided: str = "two"

    def __post_init__(self):
        if self.sided not in ("two", "greater", "less"):
            raise ValueError(f"sided must be two, greater or less, got {self.sided!r}")
        if self.sided != "two" and self.label != "imprinting":
            raise ValueError("one-sided testing is defined for the imprinting hypothesis only")
        for name, _ in self.pinned:
            if name not in model.RISK_NAMES:
                raise ValueError(f"cannot pin unknown or non-risk parameter {name!r}")

    @property
    def pinned_dict(self) -> dict[str, float]:
        return dict(self.pinned)


def association() -> Hypothesis:
    return Hypothesis("association", (("r1", 1.0), ("r2", 1.0), ("r_im", 1.0), ("s1", 1.0), ("s2", 1.0)))


def imprinting(sided: str = "two") -> Hypothesis:
    return Hypothesis("imprinting", (("r_im", 1.0),), sided)


def maternal() -> Hypothesis:
    return Hypothesis("maternal", (("s1", 1.0), ("s2", 1.0)))


def hypothesis_from_label(label: str, sided: str = "two") -> Hypothesis:
    if label == "association":
        return association()
    if label == "imprinting":
        return imprinting(sided)
    if label == "maternal":
        return maternal()
    raise ValueError(f"unknown hypothesis {label!r}")


# ---------------------------------------------------------------------------
# fitting


@dataclass(frozen=True)
class FitResult:
    """A maximized partial likelihood.

    ``estimates`` holds all six model parameters, pinned ones at their
    pinned values; ``free`` lists the parameters that were searched.
    ``at_boundary`` names parameters stuck at a search bound or involved
    in a penetrance product at the feasibility edge; their estimates (and
    the chi-square calibration of tests built on them) deserve suspicion.
    ``excluded_cells`` lists zero-count strata and the always-excluded
    doubly heterozygous pair stratum.
    """

    estimates: dict[str, float]
    loglik: float
    converged: bool
    iterations: int
    free: tuple[str, ...]
    at_boundary: frozenset[str]
    excluded_cells: tuple[str, ...]


@dataclass(frozen=True)
class TestResult:
    hypothesis: Hypothesis
    statistic: float
    df: int
    p_value: float
    fit_full: FitResult
    fit_null: FitResult


def _merge_pins(hypothesis: Optional[Hypothesis], fixed: Optional[Mapping[str, float]]):
    pins: dict[str, float] = {}
    if fixed:
        for name, value in fixed.items():
            if name == "delta":
                raise ValueError("the phenocopy rate is free in every fit and cannot be pinned")
            if name not in model.RISK_NAMES:
                raise ValueError(f"cannot pin unknown parameter {name!r}")
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"pinned value for {name} must be positive, got {value!r}")
            pins[name] = float(value)
    if hypothesis is not None:
        for name, value in hypothesis.pinned:
            if name in pins and pins[name] != value:
                raise ValueError(f"{name} pinned to conflicting values {pins[name]} and {value}")
            pins[name] = value
    return pins


def _pack(values: Mapping[str, float], free: Sequence[str]) -> list[float]:
    theta = []
    for name in free:
        v = values[name]
        if name == "delta":
            theta.append(math.log(v / (1.0 - v)))
        else:
            theta.append(math.log(v))
    return theta


def _unpack(theta, free: Sequence[str], pins: Mapping[str, float]) -> dict[str, float]:
    values = {"delta": None, "r1": 1.0, "r2": 1.0, "r_im": 1.0, "s1": 1.0, "s2": 1.0}
    values.update(pins)
    for name, t in zip(free, theta):
        if name == "delta":
            values["delta"] = 1.0 / (1.0 + math.exp(-t))
        else:
            values[name] = math.exp(t)
    return values


def fit(
    counts: CountsTable,
    prevalence: float,
    hypothesis: Optional[Hypothesis] = None,
    *,
    fixed: Optional[Mapping[str, float]] = None,
    options: FitOptions = DEFAULT_OPTIONS,
    extra_starts: Sequence[Sequence[float]] = (),
) -> FitResult:
    """Maximize the partial log-likelihood over the free parameters.

    ``hypothesis`` fits that hypothesis's null model (its parameters
    pinned); ``fixed`` adds structural pins, e.g. {"r_im": 1.0} for a
    pairs-only analysis without an imprinting term.  The search runs
    bounded Nelder-Mead over (log-odds delta, log risks) from the
    no-effect point plus deterministic perturbations, rejecting any point
    where some family type's disease probability would reach 1.
    Non-convergence is flagged on the result, not raised.
    """
    _check_prevalence(prevalence)
    pins = _merge_pins(hypothesis, fixed)
    cells = _build_cells(counts, prevalence)
    if not cells:
        raise DegenerateDataError("no informative family counts (analyzed strata are all empty)")
    free = tuple(name for name in model.PARAM_NAMES if name not in pins)

    def negloglik(theta) -> float:
        v = _unpack(theta, free, pins)
        return -_loglik_cells(cells, v["delta"], v["r1"], v["r2"], v["r_im"], v["s1"], v["s2"])

    start = {name: 1.0 for name in model.RISK_NAMES}
    start["delta"] = prevalence
    x0 = _pack(start, free)
    bounds = [
        (-_LOGIT_DELTA_BOUND, _LOGIT_DELTA_BOUND) if name == "delta" else (-_LOG_RISK_BOUND, _LOG_RISK_BOUND)
        for name in free
    ]
    result = maximize(negloglik, x0, bounds, options, extra_starts=extra_starts)
    estimates = _unpack(result.x, free, pins)

    at_boundary = set()
    for name, t, (lo, hi) in zip(free, result.x, bounds):
        if t <= lo + _BOUNDARY_TOL or t >= hi - _BOUNDARY_TOL:
            at_boundary.add(name)
    prods = _products(*(estimates[name] for name in model.PARAM_NAMES))
    for pid, value in enumerate(prods):
        if value >= 1.0 - _PRODUCT_BOUNDARY_TOL:
            at_boundary.add("delta")
            for e, name in zip(_PRODUCT_EXPONENTS[pid], model.RISK_NAMES):
                if e:
                    at_boundary.add(name)

    return FitResult(
        estimates=estimates,
        loglik=result.max_value,
        converged=result.converged,
        iterations=result.iterations,
        free=free,
        at_boundary=frozenset(at_boundary & set(free)),
        excluded_cells=_excluded_cell_labels(counts),
    )


def _p_value(statistic: float, df: int, hypothesis: Hypothesis, full_estimates: Mapping[str, float]) -> float:
    two_sided = float(chi2.sf(statistic, df))
    if hypothesis.sided == "two":
        return two_sided
    # documented convention: halve the 1-df chi-square tail on the
    # hypothesized side of r_im = 1, complement on the other side
    estimate = full_estimates["r_im"]
    on_side = estimate > 1.0 if hypothesis.sided == "greater" else estimate < 1.0
    return two_sided / 2.0 if on_side else 1.0 - two_sided / 2.0


def fit_and_test(
    counts: CountsTable,
    prevalence: float,
    hypotheses: Sequence[Hypothesis],
    *,
    fixed: Optional[Mapping[str, float]] = None,
    options: FitOptions = DEFAULT_OPTIONS,
) -> tuple[FitResult, dict[str, TestResult]]:
    """Fit the full model once and test each hypothesis against it.

    The null solutions seed the full-model search, so every statistic is
    non-negative up to optimizer tolerance (and clamped at 0).
    """
    structural = _merge_pins(None, fixed)
    nulls: dict[str, FitResult] = {}
    for hyp in hypotheses:
        df = len([name for name, _ in hyp.pinned if name not in structural])
        if df == 0:
            raise ValueError(f"hypothesis {hyp.label!r} pins no free parameter of this model")
        nulls[hyp.label] = fit(counts, prevalence, hyp, fixed=fixed, options=options)

    free_full = tuple(name for name in model.PARAM_NAMES if name not in structural)
    extra = [_pack(nulls[h.label].estimates, free_full) for h in hypotheses]
    full = fit(counts, prevalence, fixed=fixed, options=options, extra_starts=extra)

    tests: dict[str, TestResult] = {}
    for hyp in hypotheses:
        null = nulls[hyp.label]
        df = len([name for name, _ in hyp.pinned if name not in structural])
        statistic = max(0.0, 2.0 * (full.loglik - null.loglik))
        tests[hyp.label] = TestResult(
            hypothesis=hyp,
            statistic=statistic,
            df=df,
            p_value=_p_value(statistic, df, hyp, full.estimates),
            fit_full=full,
            fit_null=null,
        )
    return full, tests


def lrt(
    counts: CountsTable,
    prevalence: float,
    hypothesis: Hypothesis,
    *,
    fixed: Optional[Mapping[str, float]] = None,
    options: FitOptions = DEFAULT_OPTIONS,
) -> TestResult:
    """Likelihood-ratio test of one hypothesis; see fit_and_test."""
    _, tests = fit_and_test(counts, prevalence, [hypothesis], fixed=fixed, options=options)
    return tests[hypothesis.label]
