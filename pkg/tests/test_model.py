import numpy as np
import pytest

from swiptsim import model


def test_dbm_conversions():
    assert model.dbm_to_watts(0.0) == pytest.approx(1e-3)
    assert model.dbm_to_watts(-50.0) == pytest.approx(1e-8)
    assert model.dbm_to_watts(10.0) == pytest.approx(1e-2)
    assert model.dbm_to_watts(-70.0) == pytest.approx(1e-10)
    assert model.watts_to_dbm(1e-3) == pytest.approx(0.0)
    assert model.db_to_linear(5.0) == pytest.approx(10 ** 0.5)


def test_sinr_hand_value():
    # single user, scalar channel: rho |hf|^2 / (rho sigma^2 + delta^2)
    got = model.compute_sinr([1.0], [[2.0]], 0.5, 0.1, 0.05)
    assert got == pytest.approx(0.5 * 4.0 / (0.5 * 0.1 + 0.05))
    assert got == pytest.approx(20.0)


def test_sinr_rejects_nonpositive_rho():
    with pytest.raises(ValueError):
        model.compute_sinr([1.0], [[2.0]], 0.0, 0.1, 0.05)


def test_sinr_orthogonal_beams_no_interference():
    h = np.array([1.0, 0.0], dtype=complex)
    F = np.array([[2.0, 0.0], [0.0, 3.0]], dtype=complex)  # f2 orthogonal to h
    with_interf = model.compute_sinr(h, F, 0.5, 0.1, 0.05, user=0)
    alone = model.compute_sinr(h, F[:1], 0.5, 0.1, 0.05, user=0)
    assert with_interf == pytest.approx(alone)


def _sinr_scalar_loop(H, F, rho, sig2, del2, k):
    sig = 0.0
    for i in range(H.shape[1]):
        sig += np.conj(H[k, i]) * F[k, i]
    num = rho[k] * abs(sig) ** 2
    den = rho[k] * sig2 + del2
    for u in range(H.shape[0]):
        if u == k:
            continue
        acc = 0.0
        for i in range(H.shape[1]):
            acc += np.conj(H[k, i]) * F[u, i]
        den += rho[k] * abs(acc) ** 2
    return num / den


def test_sinr_matches_scalar_loop_oracle():
    rng = np.random.default_rng(0)
    for _ in range(50):
        H = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
        F = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
        rho = rng.uniform(0.05, 0.95, 2)
        sig2, del2 = rng.uniform(0.01, 1.0, 2)
        all_vals = model.compute_sinr_all(H, F, rho, sig2, del2)
        for k in range(2):
            want = _sinr_scalar_loop(H, F, rho, sig2, del2, k)
            assert all_vals[k] == pytest.approx(want, rel=1e-12)
            got = model.compute_sinr(H[k], F, rho[k], sig2, del2, user=k)
            assert got == pytest.approx(want, rel=1e-12)


def test_sinr_increasing_in_rho():
    rng = np.random.default_rng(1)
    for _ in range(20):
        H = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
        F = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
        lo = model.compute_sinr(H[0], F, 0.3, 0.1, 0.05)
        hi = model.compute_sinr(H[0], F, 0.7, 0.1, 0.05)
        assert hi > lo


def test_harvest_hand_values():
    assert model.compute_harvested_power([1.0], [[2.0]], 1.0, 0.5, 0.1) == 0.0
    got = model.compute_harvested_power([1.0], [[2.0]], 0.0, 0.5, 0.1)
    assert got == pytest.approx(0.5 * (4.0 + 0.1))
    assert got == pytest.approx(2.05)


def test_harvest_affine_decreasing_in_rho():
    rng = np.random.default_rng(2)
    for _ in range(20):
        H = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
        F = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
        zeta, sig2 = 0.8, 0.2
        total = sum(abs(np.vdot(H[0], F[j])) ** 2 for j in range(2)) + sig2
        r1, r2 = 0.25, 0.75
        e1 = model.compute_harvested_power(H[0], F, r1, zeta, sig2)
        e2 = model.compute_harvested_power(H[0], F, r2, zeta, sig2)
        slope = (e2 - e1) / (r2 - r1)
        assert slope == pytest.approx(-zeta * total, rel=1e-12)


def test_harvest_matches_scalar_loop():
    rng = np.random.default_rng(3)
    for _ in range(30):
        H = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        F = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        rho = rng.uniform(0, 1, 3)
        got = model.compute_harvested_power_all(H, F, rho, 0.7, 0.3)
        for k in range(3):
            tot = 0.3
            for j in range(3):
                acc = sum(np.conj(H[k, i]) * F[j, i] for i in range(2))
                tot += abs(acc) ** 2
            assert got[k] == pytest.approx(0.7 * (1 - rho[k]) * tot, rel=1e-12)


def test_energy_consumed():
    assert model.energy_consumed(0.0, 0.7, 0.5) == pytest.approx(0.7)
    assert model.energy_consumed(8.0, 0.001, 0.5, 1.0) == pytest.approx(4.001)
    rng = np.random.default_rng(4)
    rates = rng.uniform(0, 20, 64)
    got = model.energy_consumed(rates, 0.01, 0.3, 2.0)
    assert np.allclose(got, 2.0 * (0.01 + 0.3 * rates), rtol=1e-12)
    with pytest.raises(ValueError):
        model.energy_consumed(-1.0, 0.1, 0.5)


def test_max_rate():
    assert model.max_rate(5.0, 1.0, 0.5, 1.0) == pytest.approx(8.0)
    assert model.max_rate(0.5, 1.0, 0.5, 1.0) == 0.0
    assert model.max_rate(1.0, 1.0, 0.5, 1.0) == 0.0  # exactly the idle cost


def test_max_harvest():
    assert model.max_harvest(10.0, 10.0) == 0.0
    assert model.max_harvest(0.0, 10.0) == pytest.approx(10.0)
    assert model.max_harvest(3.0, 10.0) == pytest.approx(7.0)


def test_rate_nonnegative_zero_iff_silent():
    dec = model.BeamDecision.zero(2, 4)
    assert np.all(dec.rates == 0.0)
    dec.gamma = np.array([3.0, 0.0])
    rates = dec.rates
    assert rates[0] == pytest.approx(2.0) and rates[1] == 0.0
    assert np.all(rates >= 0.0)


def test_channel_state_validation():
    with pytest.raises(ValueError):
        model.ChannelState(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        model.ChannelState(np.array([[np.inf, 0.0]]))
    ch = model.ChannelState(np.ones((2, 3)))
    assert ch.num_users == 2 and ch.num_antennas == 3
