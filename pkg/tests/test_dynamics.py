import numpy as np
import pytest

from swiptsim import dynamics
from swiptsim.config import desk_config


def test_queue_update_hand_values():
    assert dynamics.advance_data_queue(5.0, 3.0, 1.0) == pytest.approx(3.0)
    assert dynamics.advance_data_queue(2.0, 5.0, 1.0) == 0.0
    assert dynamics.advance_data_queue(0.0, 0.0, 4.0) == pytest.approx(4.0)


def test_queue_single_outer_clamp():
    # service beyond the backlog absorbs arrivals inside the same slot
    assert dynamics.advance_data_queue(1.0, 10.0, 4.0) == 0.0


def test_virtual_queue_hand_values():
    assert dynamics.advance_virtual_queue(1.0, 6.0, 0.1, 5.0) == pytest.approx(6.5)
    assert dynamics.advance_virtual_queue(0.0, 0.0, 0.1, 5.0) == 0.0
    assert dynamics.advance_virtual_queue(0.0, 0.5, 0.1, 5.0) == 0.0  # exact cancel


def test_battery_hand_values():
    assert dynamics.advance_battery(5.0, 2.0, 1.0, 10.0) == pytest.approx(4.0)
    assert dynamics.advance_battery(9.0, 0.0, 3.0, 10.0) == pytest.approx(10.0)
    assert dynamics.advance_battery(1.0, 1.0, 0.5, 10.0) == pytest.approx(0.5)


def test_battery_overdraw_signaled():
    with pytest.raises(dynamics.EnergyAccountingError):
        dynamics.advance_battery(1.0, 2.0, 0.0, 10.0)


def test_arrivals():
    rng = np.random.default_rng(0)
    assert np.all(dynamics.sample_arrivals(rng, 0.0, 4) == 0.0)
    draws = np.concatenate([
        dynamics.sample_arrivals(np.random.default_rng(7), 3.0, 50000),
        dynamics.sample_arrivals(np.random.default_rng(8), 3.0, 50000),
    ])
    assert abs(draws.mean() - 3.0) < 0.05
    a = dynamics.sample_arrivals(np.random.default_rng(42), 3.0, 100)
    b = dynamics.sample_arrivals(np.random.default_rng(42), 3.0, 100)
    assert np.array_equal(a, b)


def test_queue_monotonicity():
    rng = np.random.default_rng(1)
    for _ in range(200):
        q, r, a = rng.uniform(0, 10, 3)
        up = dynamics.advance_data_queue(q, r, a + 1.0)
        assert up >= dynamics.advance_data_queue(q, r, a)
        down = dynamics.advance_data_queue(q, r + 1.0, a)
        assert down <= dynamics.advance_data_queue(q, r, a)


def test_trajectory_invariants_and_energy_accounting():
    cfg = desk_config(num_users=2)
    rng = np.random.default_rng(3)
    state = dynamics.NetworkState.initial(cfg)
    b0 = state.battery.copy()
    used_sum = np.zeros(2)
    banked_sum = np.zeros(2)
    overflow_sum = np.zeros(2)
    for _ in range(400):
        state.arrivals = dynamics.sample_arrivals(rng, 3.0, 2)
        rate = rng.uniform(0, model_rate_cap(state, cfg))
        from swiptsim.model import BeamDecision
        dec = BeamDecision.zero(2, 4)
        dec.gamma = np.exp2(rate) - 1.0
        dec.harvest = rng.uniform(0, 3.0, 2)
        tr = dynamics.advance_state(state, dec, cfg)
        assert np.all(state.battery >= 0.0)
        assert np.all(state.battery <= cfg.battery_capacity + 1e-12)
        assert np.all(state.data_queue >= 0.0)
        assert np.all(state.virtual_queue >= 0.0)
        used_sum += tr.energy_used
        banked_sum += tr.energy_banked
        overflow_sum += tr.overflow
    # telescoped energy balance (no clamped draws along this trajectory)
    assert np.allclose(
        banked_sum - used_sum - overflow_sum, state.battery - b0, atol=1e-9
    )
    assert np.all(overflow_sum >= 0.0)


def model_rate_cap(state, cfg):
    from swiptsim.model import max_rate
    return np.maximum(
        max_rate(state.battery, cfg.circuit_power, cfg.decoder_efficiency), 1e-9
    )
