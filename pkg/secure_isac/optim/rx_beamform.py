"""Receive beamforming - closed-form filter maximizing the sensing SINR"""

import logging

import numpy as np
from scipy import linalg

from secure_isac.core.channel import ChannelState
from secure_isac.core.exceptions import DegenerateDirection


LOG = logging.getLogger('secure-isac.rx_beamform')

DEGENERATE_RTOL = 1e-14


def _interference_covariance(f, h_si, noise_power) -> np.ndarray:
    """A / noise_power with A = H_SI (sum_i f_i f_i^H) H_SI^H + noise_power I"""
    g = h_si @ f.T
    return g @ g.conj().T / noise_power + np.eye(h_si.shape[0])


def mvdr_direction(f, chi_e, h_si, noise_power) -> np.ndarray:
    """Unit vector along A^-1 chi_E"""
    a = _interference_covariance(f, h_si, noise_power)
    x = linalg.cho_solve(linalg.cho_factor(a, lower=True), chi_e)
    return x / np.linalg.norm(x)


def optimal_rx_filter(f, chi_e, zeta, h_si, noise_power) -> np.ndarray:
    """Receive filter maximizing the sensing SINR of one slot

    w = A^-1 chi_E chi_E^H (sum_i f_i) normalized, solved through a Cholesky
    factorization of the Hermitian positive definite A.

    :param f: transmit beams of the slot, (K+1, M)
    :param chi_e: eavesdropper direction, (M,)
    :param zeta: echo amplitude gain (scales the SINR, not the filter)
    :param h_si: self-interference matrix, (M, M)
    :param noise_power: receiver noise power, watts
    :returns: unit-norm filter, (M,)
    :raises: DegenerateDirection when chi_E^H sum_i f_i vanishes
    """
    f = np.atleast_2d(np.asarray(f, dtype=complex))
    total = f.sum(axis=0)
    projection = np.vdot(chi_e, total)
    scale = np.linalg.norm(chi_e) * np.linalg.norm(total)
    if scale == 0.0 or abs(projection) <= DEGENERATE_RTOL * scale:
        raise DegenerateDirection("transmit beams have no projection on the eavesdropper")

    a = _interference_covariance(f, h_si, noise_power)
    x = linalg.cho_solve(linalg.cho_factor(a, lower=True), chi_e * projection)
    return x / np.linalg.norm(x)


def rx_filter_or_fallback(f, chi_e, zeta, h_si, noise_power) -> np.ndarray:
    """`optimal_rx_filter`, falling back when its direction is undefined

    With echo energy left the MVDR direction A^-1 chi_E is still optimal;
    without any, every filter gives zero SINR and chi_E is used.
    """
    try:
        return optimal_rx_filter(f, chi_e, zeta, h_si, noise_power)
    except DegenerateDirection:
        f = np.atleast_2d(np.asarray(f, dtype=complex))
        if np.sum(np.abs(f @ np.conj(chi_e)) ** 2) > 0.0:
            LOG.debug("beams cancel along chi_E, using the MVDR direction")
            return mvdr_direction(f, chi_e, h_si, noise_power)
        LOG.debug("no echo energy, receive filter falls back to chi_E")
        return chi_e / np.linalg.norm(chi_e)


def rx_filters(channels: ChannelState, f) -> np.ndarray:
    """Optimal receive filter of every slot for beams `f` of shape (N_t, K+1, M)"""
    return np.array([
        rx_filter_or_fallback(f[n], channels.chi_e(n), channels.zeta[n],
                              channels.h_si[n], channels.noise_power)
        for n in range(channels.slot_count)
    ])
