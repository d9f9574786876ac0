import numpy as np
import pytest

from lwpair import (
    LevelConfig,
    StopCondition,
    circular_initial_condition,
    make_params,
    trajectory,
)


@pytest.fixture(scope="session")
def retarded_eta1():
    return make_params(1.0, -1, 0.5)


@pytest.fixture(scope="session")
def symmetric_eta1():
    return make_params(1.0, -1, 0.0)


@pytest.fixture(scope="session")
def run_cache():
    """Session cache of expensive trajectories keyed by the run setup."""
    cache = {}

    def get(eta, alpha, level, r0=50.0, t_limit=1e6, v_threshold=0.8, engine="auto"):
        key = (eta, alpha, level, r0, t_limit, v_threshold, engine)
        if key not in cache:
            params = make_params(eta, -1, alpha)
            stop = StopCondition(
                v_threshold=v_threshold, min_separation=1e-6, t_limit=t_limit
            )
            cache[key] = trajectory(
                level,
                circular_initial_condition(params, r0),
                params,
                LevelConfig(),
                stop,
                engine=engine,
            )
        return cache[key]

    return get


def rng(seed=0):
    return np.random.default_rng(seed)
