import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dualkin.harness import ExperimentConfig, synthesize_dataset
from dualkin.kinematics import ImuMounting, KinematicChain


@pytest.fixture(scope="session")
def config():
    return ExperimentConfig()


@pytest.fixture(scope="session")
def arm_chain(config):
    return config.chain()


@pytest.fixture(scope="session")
def dataset(config):
    """One seeded noisy batch at the true parameters."""
    return synthesize_dataset(config, seed=42)


@pytest.fixture(scope="session")
def problem(config):
    return config.problem()


@pytest.fixture(scope="session")
def general_chain():
    """Three joints with non-parallel axes and a moving base."""
    return KinematicChain(
        axes=np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]),
        offsets=np.array([[0.05, 0.02, -0.01], [0.2, 0.03, 0.01], [0.15, -0.02, 0.04]]),
        base_omega=[0.3, -0.2, 0.5],
        base_omegadot=[0.1, 0.4, -0.3],
        base_rddot=[0.2, -0.1, 0.3],
        mountings=(
            ImuMounting(1, [0.1, 0.02, 0.05], [0.1, 3.0, -0.2]),
            ImuMounting(3, [0.07, -0.03, 0.02], [0.0, np.pi, 0.0]),
            ImuMounting(2, [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]),
        ),
    )
