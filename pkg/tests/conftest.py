import numpy as np
import pytest

from asepkpz.she import run_interval_ensemble

# Acceptance-scale ensembles (A = B = 0, Bernoulli(1/2) start, T = 0.1) shared
# by the microscopic-SHE, martingale, and convergence criteria.  Generated
# once per session; generation time is attributed to the first criterion that
# requests the fixture.

ENSEMBLE_SEED = 31415
ENSEMBLE_T = 0.1
ENSEMBLE_REPLICAS = 2000


@pytest.fixture(scope="session")
def ensemble32():
    import time
    t0 = time.time()
    ens = run_interval_ensemble(32, 0.0, 0.0, ENSEMBLE_T, ENSEMBLE_REPLICAS,
                                (ENSEMBLE_SEED, 32), keep_trajectories=True)
    print(f"\n[fixture] eps=1/32 ensemble: {ENSEMBLE_REPLICAS} replicas "
          f"in {time.time() - t0:.1f}s")
    return ens


@pytest.fixture(scope="session")
def ensemble64():
    import time
    t0 = time.time()
    ens = run_interval_ensemble(64, 0.0, 0.0, ENSEMBLE_T, ENSEMBLE_REPLICAS,
                                (ENSEMBLE_SEED, 64))
    print(f"\n[fixture] eps=1/64 ensemble: {ENSEMBLE_REPLICAS} replicas "
          f"in {time.time() - t0:.1f}s")
    return ens


def rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
