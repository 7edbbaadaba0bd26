"""Uncorrelated Rician fading with a far-field ULA line-of-sight component."""

import numpy as np

from .model import ChannelState


def los_steering(theta, num_antennas, amplitude):
    """Far-field ULA steering vector amp * [1, e^{-j pi sin(theta)}, ...]."""
    n = np.arange(num_antennas)
    return amplitude * np.exp(-1j * np.pi * n * np.sin(theta))


def draw_angles(rng, num_users):
    """Azimuths uniform on [-pi/2, pi/2]."""
    return rng.uniform(-np.pi / 2, np.pi / 2, num_users)


def generate_channel(rng, thetas, rician_factor, pathloss_amplitude, num_antennas):
    """One slot of channel vectors.

    h = sqrt(kappa/(1+kappa)) h_LoS + sqrt(1/(1+kappa)) h_NLoS with the NLoS
    part i.i.d. circular complex Gaussian at the same average path loss, so
    E[|h_i|^2] = pathloss_amplitude^2 regardless of kappa.
    """
    if rician_factor < 0:
        raise ValueError("Rician factor must be non-negative")
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    K = thetas.size
    w_los = np.sqrt(rician_factor / (1.0 + rician_factor))
    w_nlos = np.sqrt(1.0 / (1.0 + rician_factor))
    H = np.empty((K, num_antennas), dtype=complex)
    for k in range(K):
        los = los_steering(thetas[k], num_antennas, pathloss_amplitude)
        nlos = pathloss_amplitude * (
            rng.standard_normal(num_antennas) + 1j * rng.standard_normal(num_antennas)
        ) / np.sqrt(2.0)
        H[k] = w_los * los + w_nlos * nlos
    return ChannelState(H)
