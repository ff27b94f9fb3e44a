import numpy as np
import pytest
from hypothesis import strategies as st

from epifam.model import FeasibilityError, MatingTypeDistribution, RiskParameters


def random_feasible_params(rng: np.random.Generator) -> RiskParameters:
    """Rejection-sample a feasible parameter point."""
    while True:
        delta = float(rng.uniform(0.005, 0.3))
        risks = np.exp(rng.uniform(-1.3, 1.3, size=5))
        try:
            return RiskParameters(delta, *map(float, risks))
        except FeasibilityError:
            continue


def random_mating(rng: np.random.Generator) -> MatingTypeDistribution:
    raw = rng.dirichlet(np.ones(9)).reshape(3, 3)
    return MatingTypeDistribution(raw / raw.sum())


@st.composite
def feasible_params_st(draw) -> RiskParameters:
    from hypothesis import assume

    delta = draw(st.floats(min_value=1e-3, max_value=0.25))
    risks = [draw(st.floats(min_value=0.25, max_value=3.0)) for _ in range(5)]
    try:
        return RiskParameters(delta, *risks)
    except FeasibilityError:
        assume(False)


@st.composite
def mating_st(draw) -> MatingTypeDistribution:
    raw = np.array([draw(st.floats(min_value=0.01, max_value=1.0)) for _ in range(9)])
    return MatingTypeDistribution((raw / raw.sum()).reshape(3, 3))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240811)
