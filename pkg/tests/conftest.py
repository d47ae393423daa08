import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tpctrack.detector import DetectorSpec, GasSpec


@pytest.fixture
def gas():
    return GasSpec("isobutane", density=2.0e-5, z_over_a=0.58496,
                   mean_excitation_energy=48.3, w_value=23.0)


@pytest.fixture
def detector(gas):
    return DetectorSpec(gas=gas)
