import numpy as np
import pytest

from singularity_cbf.magnetic import MagneticRig
from singularity_cbf.suture import map_singular_set


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def rig():
    return MagneticRig()


@pytest.fixture(scope="session")
def obstacles(rig):
    # the full 40x40x60 map takes a few seconds; share it
    return map_singular_set(rig)


@pytest.fixture(scope="session")
def arm_runs():
    from singularity_cbf.arm import ArmParameters, ArmScenario, run_arm_scenario
    p = ArmParameters()
    return {cbf: run_arm_scenario(p, ArmScenario(cbf_enabled=cbf)) for cbf in (True, False)}
