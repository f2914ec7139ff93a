import numpy as np
import pytest
from scipy.constants import e as Q_E

from qdmux import CellState, ChargeTransition, DeviceParams, default_access_params
from qdmux.chipconfig import ChipConfig, build_matrix

E_C_DEFAULT = Q_E * 0.02142
SPACING = 0.02142 / 0.8


def make_device(n_peaks=4, first=0.40, gamma_s=4e11, gamma_d=5e10, c_q_max=1.5e-16,
                alpha=0.8, alpha_s=0.5, e_c=E_C_DEFAULT, extra=()):
    transitions = list(extra) + [
        ChargeTransition(first + k * SPACING, alpha=alpha, gamma_s=gamma_s,
                         gamma_d=gamma_d, c_q_max=c_q_max)
        for k in range(n_peaks)
    ]
    transitions.sort(key=lambda t: t.v_peak)
    return DeviceParams(transitions=tuple(transitions), e_c=e_c, alpha_s=alpha_s)


@pytest.fixture(scope="session")
def device():
    return make_device()


@pytest.fixture(scope="session")
def access():
    return default_access_params()


@pytest.fixture(scope="session")
def cell(device, access):
    return CellState(device=device, access=access)


@pytest.fixture(scope="session")
def config():
    return ChipConfig.default()


@pytest.fixture(scope="session")
def chip(config):
    return build_matrix(config)


@pytest.fixture
def rng():
    return np.random.default_rng(20210917)
