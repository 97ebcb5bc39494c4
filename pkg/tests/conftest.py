import pytest
import numpy as np

from oitsolver.oit import TwoLayerMedium
from oitsolver.spectrum import LayerGrid
from oitsolver.stefan import StefanConfig


@pytest.fixture
def two_layer_grid():
    return LayerGrid.from_lengths([1.2, 1.0], [7.0, 0.7])


@pytest.fixture
def freezing_config():
    return StefanConfig(
        y_minus=1.0,
        y_plus=50.0,
        T_s=270.0,
        T_m=273.0,
        T_l=290.0,
        kappa_I=1.02,
        kappa_W=0.13,
        rho_I=917.0,
        rho_W=997.0,
        L=49.86 / 917.0,
    )


@pytest.fixture
def obm_medium():
    return TwoLayerMedium(y=0.0, sigma_minus=1.0, sigma_plus=2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)
