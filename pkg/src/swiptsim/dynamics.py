"""Per-slot stochastic state machine: data queues, virtual queues, batteries.

Slot ordering: arrivals are realized first, then channels are drawn, the
controller decides, and finally queues and batteries advance.  Energy
harvested in slot t is banked and becomes usable from slot t+1
(harvest-store-use).
"""

import numpy as np
from dataclasses import dataclass, field

from . import model


class EnergyAccountingError(RuntimeError):
    """Raised when a slot tries to spend more energy than the battery holds."""


def sample_arrivals(rng, mean_arrival, num_users):
    """i.i.d. Poisson arrival draws, in bits."""
    if mean_arrival < 0:
        raise ValueError("mean arrival must be non-negative")
    if mean_arrival == 0:
        return np.zeros(num_users)
    return rng.poisson(mean_arrival, num_users).astype(float)


def advance_data_queue(queue, rate, arrivals):
    """max(0, Q - R + A): one clamp over the whole expression.

    Note the single outer clamp means arrivals can be partially absorbed by
    unused service when R > Q.
    """
    return np.maximum(0.0, np.asarray(queue) - np.asarray(rate) + np.asarray(arrivals))


def advance_virtual_queue(virtual, queue_next, violation_prob, queue_threshold):
    """max(0, Z + Q(t+1) - eps * Q_th), fed by the already-updated data queue."""
    return np.maximum(
        0.0,
        np.asarray(virtual) + np.asarray(queue_next)
        - violation_prob * np.asarray(queue_threshold),
    )


def advance_battery(battery, energy_used, energy_harvested, battery_capacity):
    """min(B_max, [B - E_used]^+ + E_harvested).

    Spending more than the battery holds is a contract violation upstream
    (the rate cap guarantees E_used <= B); it is signaled distinctly rather
    than silently clamped.
    """
    battery = np.asarray(battery, dtype=float)
    energy_used = np.asarray(energy_used, dtype=float)
    energy_harvested = np.asarray(energy_harvested, dtype=float)
    if np.any(energy_used < -1e-15) or np.any(energy_harvested < -1e-15):
        raise ValueError("energies must be non-negative")
    slack = 1e-9 * np.maximum(1.0, battery)
    if np.any(energy_used > battery + slack):
        raise EnergyAccountingError(
            f"energy draw {energy_used} exceeds battery {battery}"
        )
    return np.minimum(
        np.asarray(battery_capacity, dtype=float),
        np.maximum(0.0, battery - energy_used) + energy_harvested,
    )


@dataclass
class NetworkState:
    """Queues, virtual queues and battery levels for one trajectory."""

    data_queue: np.ndarray
    virtual_queue: np.ndarray
    battery: np.ndarray
    arrivals: np.ndarray = None   # arrivals realized for the current slot

    def __post_init__(self):
        self.data_queue = np.asarray(self.data_queue, dtype=float)
        self.virtual_queue = np.asarray(self.virtual_queue, dtype=float)
        self.battery = np.asarray(self.battery, dtype=float)
        if self.arrivals is None:
            self.arrivals = np.zeros_like(self.data_queue)
        self.arrivals = np.asarray(self.arrivals, dtype=float)

    @classmethod
    def initial(cls, config):
        """Empty queues, half-charged batteries (both configurable)."""
        K = config.num_users
        return cls(
            data_queue=np.zeros(K),
            virtual_queue=np.zeros(K),
            battery=config.initial_battery_frac * config.battery_capacity.copy(),
        )

    def spare_battery(self, config):
        return model.max_harvest(self.battery, config.battery_capacity)

    def copy(self):
        return NetworkState(
            data_queue=self.data_queue.copy(),
            virtual_queue=self.virtual_queue.copy(),
            battery=self.battery.copy(),
            arrivals=self.arrivals.copy(),
        )


@dataclass
class SlotTransition:
    """Bookkeeping from one state advance."""

    energy_used: np.ndarray
    energy_banked: np.ndarray       # harvested energy actually stored
    overflow: np.ndarray            # banked energy lost to the capacity cap
    used_clipped: np.ndarray = field(default=None)  # True where draw hit the battery floor


def advance_state(state, decision, config):
    """Apply a slot decision in place: rates drain the battery, the harvest
    epigraph value is banked, then Q, Z, B advance.  Returns a SlotTransition.
    """
    rates = decision.rates
    energy_used = model.energy_consumed(
        rates, config.circuit_power, config.decoder_efficiency, config.slot_duration
    )
    # The rate cap keeps the draw within the battery except in the pathological
    # sub-circuit-power regime; clip there and flag it.
    clipped = energy_used > state.battery
    energy_used = np.minimum(energy_used, state.battery)
    banked = np.asarray(decision.harvest, dtype=float)

    after_use = np.maximum(0.0, state.battery - energy_used)
    overflow = np.maximum(0.0, after_use + banked - config.battery_capacity)
    state.battery = advance_battery(
        state.battery, energy_used, banked, config.battery_capacity
    )
    state.data_queue = advance_data_queue(state.data_queue, rates, state.arrivals)
    state.virtual_queue = advance_virtual_queue(
        state.virtual_queue, state.data_queue, config.violation_prob,
        config.queue_threshold,
    )
    return SlotTransition(
        energy_used=energy_used,
        energy_banked=banked,
        overflow=overflow,
        used_clipped=clipped,
    )
