"""Physical-layer quantities for the power-splitting SWIPT downlink.

All arithmetic is carried out in SI linear units (watts, joules, bits).
dBm/dB conversions happen only at the configuration boundary.
"""

import numpy as np
from dataclasses import dataclass, field


def dbm_to_watts(p_dbm):
    """Convert dBm to watts: 10^((p-30)/10)."""
    return 10.0 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(p_w):
    """Convert watts to dBm. Zero maps to -inf."""
    p = np.asarray(p_w, dtype=float)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(p) + 30.0


def db_to_linear(x_db):
    """Convert a dB ratio to linear scale."""
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


@dataclass
class ChannelState:
    """Downlink channel vectors for one slot, one row per user (K x Nt)."""

    H: np.ndarray

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=complex)
        if self.H.ndim != 2:
            raise ValueError("channel matrix must be K x Nt")
        if not np.all(np.isfinite(self.H)):
            raise ValueError("channel entries must be finite")
        if np.any(np.linalg.norm(self.H, axis=1) <= 0.0):
            raise ValueError("each user's channel vector must have positive norm")

    @property
    def num_users(self):
        return self.H.shape[0]

    @property
    def num_antennas(self):
        return self.H.shape[1]


@dataclass
class BeamDecision:
    """Per-slot controller output: beamformers, PS ratios and epigraph variables.

    ``gamma`` and ``harvest`` are the optimization variables the per-slot
    solvers return; ``rates`` is log2(1 + gamma) and ``tx_power`` the total
    transmit power sum_k ||f_k||^2.
    """

    F: np.ndarray           # K x Nt complex beamformers
    rho: np.ndarray         # K power-splitting ratios (share to the decoder)
    gamma: np.ndarray       # K per-user SINR variables
    harvest: np.ndarray     # K per-user harvested energy variables [J/slot]
    objective: float = 0.0  # per-slot surrogate objective at the decision
    diagnostics: dict = field(default_factory=dict)

    @property
    def rates(self):
        return np.log2(1.0 + self.gamma)

    @property
    def tx_power(self):
        return float(np.sum(np.abs(self.F) ** 2))

    @classmethod
    def zero(cls, num_users, num_antennas, rho_value=0.5, **diag):
        return cls(
            F=np.zeros((num_users, num_antennas), dtype=complex),
            rho=np.full(num_users, rho_value),
            gamma=np.zeros(num_users),
            harvest=np.zeros(num_users),
            objective=0.0,
            diagnostics=dict(diag),
        )


def compute_sinr(h_k, F, rho_k, rx_noise_var, id_noise_var, user=0):
    """Received SINR at the decoding branch of one user.

    rho |h^H f_k|^2 / (rho * sum_{u != k} |h^H f_u|^2 + rho sigma^2 + delta^2)
    where rho is the split toward the decoder.  rho must be positive, else
    the decoder-noise term delta^2 / rho is singular.
    """
    if rho_k <= 0.0:
        raise ValueError("power-splitting ratio must be positive to decode")
    h_k = np.asarray(h_k, dtype=complex)
    F = np.atleast_2d(np.asarray(F, dtype=complex))
    gains = np.abs(F @ h_k.conj()) ** 2
    signal = gains[user]
    interference = float(np.sum(gains)) - float(signal)
    return float(rho_k * signal / (rho_k * interference + rho_k * rx_noise_var + id_noise_var))


def compute_sinr_all(H, F, rho, rx_noise_var, id_noise_var):
    """Vector of received SINRs for all users."""
    H = np.asarray(H, dtype=complex)
    F = np.asarray(F, dtype=complex)
    rho = np.asarray(rho, dtype=float)
    gains = np.abs(H.conj() @ F.T) ** 2      # gains[k, u] = |h_k^H f_u|^2
    signal = np.diag(gains)
    interference = gains.sum(axis=1) - signal
    sig2 = np.broadcast_to(np.asarray(rx_noise_var, dtype=float), rho.shape)
    del2 = np.broadcast_to(np.asarray(id_noise_var, dtype=float), rho.shape)
    return rho * signal / (rho * interference + rho * sig2 + del2)


def compute_harvested_power(h_k, F, rho_k, eh_efficiency, rx_noise_var):
    """Power collected by the harvesting branch of one user.

    zeta * (1 - rho) * (sum_j |h^H f_j|^2 + sigma^2); the antenna noise is
    harvested along with all downlink beams.
    """
    if not 0.0 <= rho_k <= 1.0:
        raise ValueError("power-splitting ratio must lie in [0, 1]")
    h_k = np.asarray(h_k, dtype=complex)
    F = np.atleast_2d(np.asarray(F, dtype=complex))
    total = float(np.sum(np.abs(F @ h_k.conj()) ** 2)) + rx_noise_var
    return float(eh_efficiency * (1.0 - rho_k) * total)


def compute_harvested_power_all(H, F, rho, eh_efficiency, rx_noise_var):
    H = np.asarray(H, dtype=complex)
    F = np.asarray(F, dtype=complex)
    rho = np.asarray(rho, dtype=float)
    totals = (np.abs(H.conj() @ F.T) ** 2).sum(axis=1) + rx_noise_var
    return eh_efficiency * (1.0 - rho) * totals


def energy_consumed(rate, circuit_power, decoder_efficiency, slot_duration=1.0):
    """Receiver-side energy drawn in one slot: T_f (P_cir + theta_dec * R)."""
    rate = np.asarray(rate, dtype=float)
    if np.any(rate < 0.0):
        raise ValueError("rate must be non-negative")
    return slot_duration * (circuit_power + decoder_efficiency * rate)


def max_rate(battery, circuit_power, decoder_efficiency, slot_duration=1.0):
    """Largest downlink rate the battery can pay for this slot.

    The entire current battery level is treated as spendable energy, so
    R_max = (B - T_f P_cir) / (T_f theta_dec), clamped at zero.
    """
    battery = np.asarray(battery, dtype=float)
    return np.maximum(
        0.0, (battery - slot_duration * circuit_power) / (slot_duration * decoder_efficiency)
    )


def max_harvest(battery, battery_capacity):
    """Spare battery room: harvesting beyond it is discarded."""
    battery = np.asarray(battery, dtype=float)
    return np.asarray(battery_capacity, dtype=float) - battery
