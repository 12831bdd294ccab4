"""Shared fixtures: the heavy acceptance ensembles are session-scoped."""

import numpy as np
import pytest

import imchaos as ic

# Seeds pinned for the statistical-witness criteria; see the acceptance
# module for what each run must exhibit.
SMALL_BALL_SEED = 13
MOMENT_SEED = 7


@pytest.fixture(scope="session")
def circle_ensemble_1e5():
    cfg = ic.EnsembleConfig(
        kind="circle", beta=0.5, modes=64, grid_n=256, samples=10**5, seed=SMALL_BALL_SEED, workers=8
    )
    return ic.run_chaos_ensemble(cfg)


@pytest.fixture(scope="session")
def circle_ensemble_1e6():
    cfg = ic.EnsembleConfig(
        kind="circle", beta=0.5, modes=64, grid_n=256, samples=10**6, seed=SMALL_BALL_SEED, workers=8
    )
    return ic.run_chaos_ensemble(cfg)


@pytest.fixture(scope="session")
def moment_ensemble_1e6():
    cfg = ic.EnsembleConfig(
        kind="circle", beta=0.8, modes=64, grid_n=256, samples=10**6, seed=MOMENT_SEED, workers=8
    )
    return ic.run_chaos_ensemble(cfg)


def modulus_se(values: np.ndarray) -> float:
    """Standard error of the complex sample mean, modulus scale."""
    m = values.size
    return float(np.sqrt(values.real.var() + values.imag.var()) / np.sqrt(m))
