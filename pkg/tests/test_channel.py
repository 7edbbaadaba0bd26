import numpy as np
import pytest

from swiptsim import channel


def test_pure_los_at_boresight():
    rng = np.random.default_rng(0)
    ch = channel.generate_channel(rng, [0.0], 1e12, 1e-2, 4)
    assert np.allclose(ch.H[0], 0.01 * np.ones(4), atol=1e-7)


def test_pure_nlos_norm_bookkeeping():
    rng = np.random.default_rng(1)
    norms = []
    for _ in range(4000):
        ch = channel.generate_channel(rng, [0.3], 0.0, 1e-2, 8)
        norms.append(np.linalg.norm(ch.H[0]) ** 2)
    assert np.mean(norms) == pytest.approx(8 * 1e-4, rel=0.05)


def test_rician_mixing_coefficients():
    # 5 dB factor: the deterministic part of E[h] is sqrt(k/(1+k)) h_los
    kappa = 10 ** 0.5
    w_los = np.sqrt(kappa / (1 + kappa))
    w_nlos = np.sqrt(1 / (1 + kappa))
    assert w_los == pytest.approx(0.87164, abs=1e-4)
    assert w_nlos == pytest.approx(0.49016, abs=1e-4)
    rng = np.random.default_rng(2)
    theta = 0.7
    acc = np.zeros(4, dtype=complex)
    n = 6000
    for _ in range(n):
        acc += channel.generate_channel(rng, [theta], kappa, 1e-2, 4).H[0]
    mean = acc / n
    los = channel.los_steering(theta, 4, 1e-2)
    assert np.allclose(mean, w_los * los, atol=2e-4)
    # second moment: E||h||^2 = Nt amp^2 regardless of kappa
    norms = [
        np.linalg.norm(channel.generate_channel(rng, [theta], kappa, 1e-2, 4).H[0]) ** 2
        for _ in range(4000)
    ]
    assert np.mean(norms) == pytest.approx(4e-4, rel=0.05)


def test_los_steering_phases():
    v = channel.los_steering(np.pi / 6, 3, 1.0)  # sin = 1/2
    assert v[0] == pytest.approx(1.0)
    assert np.angle(v[1]) == pytest.approx(-np.pi / 2)
    assert abs(v[2] - np.exp(-1j * np.pi)) < 1e-12


def test_determinism():
    a = channel.generate_channel(np.random.default_rng(9), [0.1, -0.4], 2.0, 1e-2, 4)
    b = channel.generate_channel(np.random.default_rng(9), [0.1, -0.4], 2.0, 1e-2, 4)
    assert np.array_equal(a.H, b.H)


def test_angles_range():
    th = channel.draw_angles(np.random.default_rng(5), 1000)
    assert np.all(th >= -np.pi / 2) and np.all(th <= np.pi / 2)


def test_negative_factor_rejected():
    with pytest.raises(ValueError):
        channel.generate_channel(np.random.default_rng(0), [0.0], -1.0, 1e-2, 4)
