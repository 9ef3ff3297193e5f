import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def darboux2_exact(s):
    return -1.0 / (s + np.conj(s) + 4.0)


def darboux2_data(radius=0.2, nodes=128):
    """Holomorphic data reproducing the explicit solution w = -1/(z + zbar + 4)."""
    from pseudocurve.solver import HolomorphicData, holomorphic_coefficients

    bs = radius * np.exp(2j * np.pi * np.arange(nodes) / nodes)
    P = holomorphic_coefficients(darboux2_exact(bs) ** 2, radius)
    return HolomorphicData([0.0, 1.0], P, -0.25)


@pytest.fixture
def darboux2_json(tmp_path):
    path = tmp_path / "soln_data.json"
    path.write_text(json.dumps(darboux2_data().to_json()))
    return path
