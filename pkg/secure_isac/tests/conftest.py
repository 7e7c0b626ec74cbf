"""Shared fixtures: small scenarios and seeded random generators"""

import numpy as np
import pytest

from secure_isac.core.channel import ChannelState
from secure_isac.core.scenario import ScenarioConfig, load_scenario


DESK = {
    'users': [[30.0, 30.0], [50.0, 30.0]],
    'eavesdropper': [20.0, 0.0],
    'altitude_m': 40.0,
    'mission_time_s': 4.0,
    'slot_len_s': 0.2,
    'v_max_mps': 50.0,
    'p_max_w': 5.0,
    'gamma_th_db': 10.0,
    'noise_power_dbm': -110.0,
    'beta0_db': -30.0,
    'rcs_m2': 0.1,
    'si_power_db': -70.0,
    'mx': 2,
    'my': 2,
    'q0': [20.0, 50.0],
    'qf': [50.0, 10.0],
    'seed': 0,
}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def desk_document():
    return dict(DESK)


@pytest.fixture
def desk_cfg():
    return load_scenario(dict(DESK))


@pytest.fixture
def small_cfg():
    """Two users, 2x2 array, five slots"""
    return ScenarioConfig(users=((30.0, 30.0), (50.0, 30.0)), eavesdropper=(20.0, 0.0),
                          mission_time=1.0, slot_len=0.2, mx=2, my=2,
                          q0=(20.0, 40.0), qf=(40.0, 20.0), max_outer_iters=3)


@pytest.fixture
def micro_cfg():
    """One user, two antennas, single slot, no sensing constraint"""
    return ScenarioConfig(users=((30.0, 30.0),), eavesdropper=(20.0, 0.0),
                          mission_time=0.05, slot_len=0.05, mx=2, my=1,
                          q0=(25.0, 20.0), qf=(25.0, 20.0), gamma_th=0.0)


def random_beams(rng, n_slots, K, M, p_max):
    """Random beams with total slot power p_max, (n_slots, K+1, M)"""
    f = rng.standard_normal((n_slots, K + 1, M)) + 1j * rng.standard_normal((n_slots, K + 1, M))
    power = np.sum(np.abs(f) ** 2, axis=(1, 2), keepdims=True)
    return f * np.sqrt(p_max / power)


def random_unit(rng, M, size=None):
    shape = (M,) if size is None else (size, M)
    v = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def make_channels(chi, beta, zeta, h_si=None, noise_power=1.0):
    """ChannelState from raw arrays; chi is (N_t, K+1, M)"""
    chi = np.asarray(chi, dtype=complex)
    n_slots, n_nodes, M = chi.shape
    if h_si is None:
        h_si = np.zeros((n_slots, M, M), dtype=complex)
    return ChannelState(chi=chi, los=chi.copy(),
                        beta=np.broadcast_to(np.asarray(beta, dtype=float), (n_slots, n_nodes)).copy(),
                        zeta=np.broadcast_to(np.asarray(zeta, dtype=float), (n_slots,)).copy(),
                        h_si=np.asarray(h_si, dtype=complex),
                        elevation=np.zeros((n_slots, n_nodes)), azimuth=np.zeros((n_slots, n_nodes)),
                        noise_power=noise_power)


def random_channels(rng, n_slots, K, M, si_power=0.0, noise_power=1e-3):
    """Random unit directions with O(1) gains"""
    chi = random_unit(rng, M, size=n_slots * (K + 1)).reshape(n_slots, K + 1, M)
    beta = rng.uniform(0.5, 2.0, (n_slots, K + 1))
    zeta = rng.uniform(0.5, 1.0, n_slots)
    h_si = np.sqrt(si_power / 2.0) * (rng.standard_normal((n_slots, M, M))
                                      + 1j * rng.standard_normal((n_slots, M, M)))
    return make_channels(chi, beta, zeta, h_si, noise_power)
