"""Channel - planar-array steering, Rician channels and sensing gains"""

import dataclasses
import logging
import math

import numpy as np

from secure_isac.core.exceptions import DegenerateDirection
from secure_isac.core.scenario import ScenarioConfig, Trajectory


LOG = logging.getLogger('secure-isac.channel')

# Independent random streams derived from the scenario seed
SI_STREAM = 1
NLOS_STREAM = 2


def _complex_gaussian(rng: np.random.Generator, shape, variance):
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def direction_cosines(q_u, q_i, altitude):
    """Direction of node `q_i` seen from the UAV hovering over `q_u`
    :returns: (u, v, elevation, azimuth) with u = cos(az) sin(el), v = sin(az) sin(el)
    :raises: DegenerateDirection for zero 3D distance
    """
    dx, dy = np.asarray(q_i, dtype=float) - np.asarray(q_u, dtype=float)
    d3 = math.sqrt(altitude ** 2 + dx ** 2 + dy ** 2)
    if d3 == 0.0:
        raise DegenerateDirection("node coincides with the UAV")
    elevation = math.atan2(math.hypot(dx, dy), altitude)
    azimuth = math.atan2(dy, dx)
    return dx / d3, dy / d3, elevation, azimuth


def steering_vector(q_u, q_i, altitude, mx, my) -> np.ndarray:
    """Unit-norm LOS response of an mx-by-my half-wavelength planar array

    Entries are exp(-j*pi*(m*u + p*v)) / sqrt(M), x index outer (Kronecker x ⊗ y).
    """
    u, v, _, _ = direction_cosines(q_u, q_i, altitude)
    ax = np.exp(-1j * math.pi * u * np.arange(mx))
    ay = np.exp(-1j * math.pi * v * np.arange(my))
    return np.kron(ax, ay) / math.sqrt(mx * my)


def _squared_range(q_u, q_i, altitude):
    dx, dy = np.asarray(q_u, dtype=float) - np.asarray(q_i, dtype=float)
    return altitude ** 2 + dx ** 2 + dy ** 2


def path_gain(q_u, q_i, cfg: ScenarioConfig) -> float:
    """Array power gain beta = M beta0 / (H^2 + |q_u - q_i|^2)"""
    return cfg.M * cfg.beta0 / _squared_range(q_u, q_i, cfg.altitude)


def sensing_gain(q_u, q_e, cfg: ScenarioConfig) -> float:
    """Round-trip amplitude gain of the eavesdropper echo

    zeta = sqrt(M^2 beta0 rcs) / d^2 with d^2 = H^2 + |q_u - q_e|^2, or the
    purely horizontal d^2 when `paper_literal_sensing_gain` is set.
    """
    if cfg.paper_literal_sensing_gain:
        d2 = _squared_range(q_u, q_e, 0.0)
        if d2 == 0.0:
            raise DegenerateDirection("horizontal sensing distance is zero")
    else:
        d2 = _squared_range(q_u, q_e, cfg.altitude)
    return math.sqrt(cfg.M ** 2 * cfg.beta0 * cfg.rcs) / d2


def rician_direction(gamma, rician_k, rng: np.random.Generator) -> np.ndarray:
    """Mix a LOS steering vector with a CSCG NLOS component

    chi = sqrt(K/(K+1)) gamma + sqrt(1/(K+1)) g, g ~ CN(0, I/M).
    """
    gamma = np.asarray(gamma, dtype=complex)
    if math.isinf(rician_k):
        return gamma.copy()
    nlos = _complex_gaussian(rng, gamma.shape, 1.0 / gamma.size)
    return (math.sqrt(rician_k / (rician_k + 1.0)) * gamma
            + math.sqrt(1.0 / (rician_k + 1.0)) * nlos)


def self_interference(cfg: ScenarioConfig, slot: int, rng=None) -> np.ndarray:
    """Residual full-duplex leakage matrix of one slot

    Entries are i.i.d. CN(0, si_power). Without `rng` the matrix is drawn from a
    stream fixed by (seed, slot), so every caller sees the same matrix.
    """
    if cfg.si_power == 0.0:
        return np.zeros((cfg.M, cfg.M), dtype=complex)
    if rng is None:
        rng = np.random.default_rng([cfg.seed, SI_STREAM, slot])
    return _complex_gaussian(rng, (cfg.M, cfg.M), cfg.si_power)


@dataclasses.dataclass
class ChannelState:
    """Per-slot channel quantities; node axis holds the K users then the eavesdropper"""

    chi: np.ndarray
    "Rician directions, (N_t, K+1, M)"
    los: np.ndarray
    "LOS steering vectors, (N_t, K+1, M)"
    beta: np.ndarray
    "Path power gains, (N_t, K+1)"
    zeta: np.ndarray
    "Eavesdropper echo amplitude gains, (N_t,)"
    h_si: np.ndarray
    "Self-interference matrices, (N_t, M, M)"
    elevation: np.ndarray
    azimuth: np.ndarray
    noise_power: float

    @property
    def slot_count(self) -> int:
        return self.chi.shape[0]

    @property
    def K(self) -> int:
        return self.chi.shape[1] - 1

    @property
    def M(self) -> int:
        return self.chi.shape[2]

    def h(self, slot) -> np.ndarray:
        """Effective channels sqrt(beta) chi of every node at `slot`, (K+1, M)"""
        return np.sqrt(self.beta[slot])[:, None] * self.chi[slot]

    def chi_e(self, slot) -> np.ndarray:
        return self.chi[slot, -1]


def channel_state(cfg: ScenarioConfig, trajectory: Trajectory, nlos_draw=None) -> ChannelState:
    """Evaluate all channels along `trajectory`
    :param cfg: scenario
    :param trajectory: UAV positions
    :param nlos_draw: None for the LOS-only model used by the optimizer,
        otherwise the index of the Rician realization to draw, int
    """
    nodes = cfg.user_array.tolist() + [list(cfg.eavesdropper)]
    n_slots, n_nodes = len(trajectory), len(nodes)

    los = np.empty((n_slots, n_nodes, cfg.M), dtype=complex)
    beta = np.empty((n_slots, n_nodes))
    elevation = np.empty((n_slots, n_nodes))
    azimuth = np.empty((n_slots, n_nodes))
    zeta = np.empty(n_slots)
    h_si = np.empty((n_slots, cfg.M, cfg.M), dtype=complex)

    for n, q_u in enumerate(trajectory.points):
        for i, q_i in enumerate(nodes):
            los[n, i] = steering_vector(q_u, q_i, cfg.altitude, cfg.mx, cfg.my)
            beta[n, i] = path_gain(q_u, q_i, cfg)
            _, _, elevation[n, i], azimuth[n, i] = direction_cosines(q_u, q_i, cfg.altitude)
        zeta[n] = sensing_gain(q_u, cfg.eavesdropper, cfg)
        h_si[n] = self_interference(cfg, n)

    if nlos_draw is None:
        chi = los.copy()
    else:
        rng = np.random.default_rng([cfg.seed, NLOS_STREAM, int(nlos_draw)])
        chi = np.empty_like(los)
        for n in range(n_slots):
            for i in range(n_nodes):
                chi[n, i] = rician_direction(los[n, i], cfg.rician_k, rng)

    return ChannelState(chi=chi, los=los, beta=beta, zeta=zeta, h_si=h_si,
                        elevation=elevation, azimuth=azimuth,
                        noise_power=cfg.noise_power)
