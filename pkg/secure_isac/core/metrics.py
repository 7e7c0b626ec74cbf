"""Metrics - SINRs, secrecy rates and sensing SINR"""

import dataclasses

import numpy as np

from secure_isac.core.channel import ChannelState, channel_state
from secure_isac.core.scenario import ScenarioConfig, Trajectory


@dataclasses.dataclass
class BeamformerSet:
    """Transmit beams and receive filters of every slot

    `f[n, k]` for k < K is the data beam of user k, `f[n, K]` the jamming beam.
    """

    f: np.ndarray
    "(N_t, K+1, M) complex"
    w: np.ndarray
    "(N_t, M) complex, unit norm"

    @property
    def K(self) -> int:
        return self.f.shape[1] - 1

    def copy(self) -> 'BeamformerSet':
        return BeamformerSet(f=self.f.copy(), w=self.w.copy())

    def power(self) -> np.ndarray:
        """Total transmit power of every slot, watts"""
        return np.sum(np.abs(self.f) ** 2, axis=(1, 2))

    def entity_power(self) -> np.ndarray:
        """Power of every beam, (N_t, K+1)"""
        return np.sum(np.abs(self.f) ** 2, axis=2)


def _projections(h, f) -> np.ndarray:
    """|h^H f_i|^2 for every row f_i of `f`"""
    return np.abs(f @ np.conj(h)) ** 2


def _sinr(h, f, k, noise_power) -> float:
    received = _projections(h, f)
    return float(received[k] / (received.sum() - received[k] + noise_power))


def user_sinr(k, channels: ChannelState, beams: BeamformerSet, slot) -> float:
    """SINR of user `k` at `slot`, jamming counted as interference"""
    return _sinr(channels.h(slot)[k], beams.f[slot], k, channels.noise_power)


def eve_sinr(k, channels: ChannelState, beams: BeamformerSet, slot) -> float:
    """SINR of the eavesdropper decoding the data of user `k` at `slot`"""
    return _sinr(channels.h(slot)[-1], beams.f[slot], k, channels.noise_power)


def secrecy_rate(k, channels: ChannelState, beams: BeamformerSet, slot, clip=True) -> float:
    """Secrecy rate of user `k` at `slot`, bits/s/Hz
    :param clip: apply [.]^+ (disable only to inspect the smooth difference)
    """
    rate = (np.log2(1.0 + user_sinr(k, channels, beams, slot))
            - np.log2(1.0 + eve_sinr(k, channels, beams, slot)))
    return max(rate, 0.0) if clip else float(rate)


def slot_secrecy_rate(channels: ChannelState, beams: BeamformerSet, slot) -> float:
    return sum(secrecy_rate(k, channels, beams, slot) for k in range(channels.K))


def slot_secrecy_rates(channels: ChannelState, beams: BeamformerSet) -> np.ndarray:
    return np.array([slot_secrecy_rate(channels, beams, n)
                     for n in range(channels.slot_count)])


def sum_secrecy_rate(channels: ChannelState, beams: BeamformerSet) -> float:
    """Objective of the planner: secrecy rates summed over slots and users"""
    return float(slot_secrecy_rates(channels, beams).sum())


def sensing_terms(f, w, chi_e, zeta, h_si, noise_power):
    """Echo power and interference-plus-noise power seen through filter `w`
    :returns: (numerator, denominator) of the sensing SINR
    """
    gain = zeta ** 2 * np.abs(np.vdot(w, chi_e)) ** 2
    echo = gain * np.sum(_projections(chi_e, f))
    leak = np.sum(_projections(h_si.conj().T @ w, f))
    return float(echo), float(leak + noise_power)


def sensing_sinr(channels: ChannelState, beams: BeamformerSet, slot, w=None) -> float:
    """Sensing SINR of the eavesdropper echo at `slot`
    :param w: receive filter overriding `beams.w[slot]`
    """
    if w is None:
        w = beams.w[slot]
    num, den = sensing_terms(beams.f[slot], w, channels.chi_e(slot), channels.zeta[slot],
                             channels.h_si[slot], channels.noise_power)
    return num / den


def sensing_sinrs(channels: ChannelState, beams: BeamformerSet) -> np.ndarray:
    return np.array([sensing_sinr(channels, beams, n) for n in range(channels.slot_count)])


def nlos_sum_secrecy_rate(cfg: ScenarioConfig, trajectory: Trajectory,
                          beams: BeamformerSet, draws: int) -> float:
    """Sum secrecy rate averaged over `draws` Rician realizations"""
    rates = [sum_secrecy_rate(channel_state(cfg, trajectory, nlos_draw=r), beams)
             for r in range(draws)]
    return float(np.mean(rates))
