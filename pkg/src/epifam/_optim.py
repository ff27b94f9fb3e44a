"""Bounded derivative-free multistart maximization shared by the model fitters.

All fits in this package run Nelder-Mead from a deterministic set of
starting points: the caller's reference point plus fixed perturbations,
each shrunk toward the reference until the objective is finite (the
objectives return +inf outside their feasible region).  The best end
point gets one polishing rerun with a fresh simplex.  Results are fully
reproducible: no randomness is involved anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize


@dataclass(frozen=True)
class FitOptions:
    """Knobs of the multistart search; the defaults suit all built-in fitters."""

    starts: int = 5  # reference point plus starts-1 fixed perturbations
    xatol: float = 1e-6
    fatol: float = 1e-9
    max_iterations: int = 2500
    polish: bool = True


DEFAULT_OPTIONS = FitOptions()

_OFFSET_SCALES = (0.6, -0.6, 1.5, -1.5, 0.3, -0.3, 2.5, -2.5)


@dataclass(frozen=True)
class OptimResult:
    x: np.ndarray
    max_value: float
    iterations: int
    converged: bool


def _shrink_to_feasible(x: np.ndarray, x0: np.ndarray, fn: Callable) -> np.ndarray | None:
    for _ in range(60):
        if math.isfinite(fn(x)):
            return x
        x = x0 + (x - x0) * 0.5
    return None


def maximize(
    objective: Callable[[np.ndarray], float],
    x0: Sequence[float],
    bounds: Sequence[tuple[float, float]],
    options: FitOptions = DEFAULT_OPTIONS,
    extra_starts: Sequence[Sequence[float]] = (),
) -> OptimResult:
    """Maximize ``-objective`` ... i.e. ``objective`` is the negated target.

    ``objective`` maps a parameter vector to the negative of the value to
    maximize and may return +inf to reject infeasible points.  ``x0``
    must be feasible.  ``extra_starts`` are additional start points
    (e.g. a nested fit's solution), clipped into bounds and shrunk to
    feasibility like the built-in perturbations.
    """
    x0 = np.asarray(x0, dtype=float)
    n = len(x0)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    if not math.isfinite(objective(x0)):
        raise RuntimeError("infeasible reference start point")

    starts = [x0]
    for k in range(max(0, options.starts - 1)):
        scale = _OFFSET_SCALES[k % len(_OFFSET_SCALES)] * (1 + k // len(_OFFSET_SCALES))
        offset = np.array([scale if (j + k) % 2 == 0 else -scale for j in range(n)])
        x = _shrink_to_feasible(np.clip(x0 + offset, lo, hi), x0, objective)
        if x is not None:
            starts.append(x)
    for extra in extra_starts:
        x = _shrink_to_feasible(np.clip(np.asarray(extra, dtype=float), lo, hi), x0, objective)
        if x is not None:
            starts.append(x)

    nm_options = {
        "xatol": options.xatol,
        "fatol": options.fatol,
        "maxiter": options.max_iterations,
        "maxfev": 2 * options.max_iterations,
    }
    best = None
    iterations = 0
    for x in starts:
        res = minimize(objective, x, method="Nelder-Mead", bounds=bounds, options=nm_options)
        iterations += res.nit
        if best is None or res.fun < best.fun:
            best = res
    if options.polish:
        res = minimize(objective, best.x, method="Nelder-Mead", bounds=bounds, options=nm_options)
        iterations += res.nit
        if res.fun <= best.fun:
            best = res
    return OptimResult(
        x=np.asarray(best.x, dtype=float),
        max_value=-float(best.fun),
        iterations=int(iterations),
        converged=bool(best.success),
    )
