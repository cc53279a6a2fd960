import numpy as np
import pytest
from hypothesis import given, strategies as st

from ferroq.network import (AdmittanceSpectrum, Metadata, Network, NetworkError, SingularConversionError,
                            device_admittance, group_delay, one_port_admittance, s_to_y, s_to_z,
                            series_element_network, y_to_s, z_to_s)

finite = st.floats(-0.9, 0.9, allow_nan=False)


def _random_passive(seed, n=7):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, 2, 2)) + 1j * rng.standard_normal((n, 2, 2))
    # scale each matrix inside the unit ball
    norms = np.linalg.norm(a, 2, axis=(1, 2))
    return a / norms[:, None, None] * rng.uniform(0.1, 0.95, n)[:, None, None]


def test_network_validation():
    f = np.array([1e9, 2e9])
    s = np.zeros((2, 2, 2))
    with pytest.raises(NetworkError):
        Network(f[::-1], s)
    with pytest.raises(NetworkError):
        Network(np.array([0.0, 1.0]), s)
    with pytest.raises(NetworkError):
        Network(f, s, z0=0)
    with pytest.raises(NetworkError):
        Network(f, np.zeros((3, 2, 2)))
    with pytest.raises(NetworkError):
        Metadata(sweep_direction="up")
    with pytest.raises(NetworkError):
        Metadata(temperature=-1)
    net = Network([1e9], np.zeros((1, 2, 2)))
    assert len(net) == 1


def test_network_is_immutable():
    net = Network([1e9, 2e9], np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        net.s[0, 0, 0] = 1


def test_one_port_masks_other_entries():
    net = Network([1e9, 2e9], np.array([0.1, 0.2]), n_ports=1)
    assert np.all(np.isnan(net.s21))
    with pytest.raises(NetworkError):
        s_to_y(net)


@given(st.integers(0, 10_000), st.floats(1.0, 500.0))
def test_s_y_round_trip(seed, z0):
    s = _random_passive(seed)
    net = Network(np.arange(1, 8) * 1e8, s, z0)
    back = y_to_s(s_to_y(net), z0)
    assert np.allclose(back, s, atol=1e-10)
    back = z_to_s(s_to_z(net), z0)
    assert np.allclose(back, s, atol=1e-10)


@given(st.integers(0, 10_000))
def test_passive_s_gives_positive_conductance(seed):
    s = _random_passive(seed)
    y = s_to_y(Network(np.arange(1, 8) * 1e8, s))
    # Hermitian part of a passive Y is positive semidefinite
    herm = 0.5 * (y + np.conj(np.swapaxes(y, 1, 2)))
    assert np.all(np.linalg.eigvalsh(herm) > -1e-12)


def test_singular_conversion_names_frequency():
    s = np.zeros((3, 2, 2), complex)
    s[1] = -np.eye(2)
    with pytest.raises(SingularConversionError) as exc:
        s_to_y(Network([1e9, 2e9, 3e9], s))
    assert exc.value.freq == 2e9


def test_identity_s_is_not_singular_for_y():
    y = s_to_y(Network([1e9], np.eye(2)[None]))
    assert np.allclose(y, 0)


@given(st.floats(1e-3, 1e3), st.floats(-1e3, 1e3))
def test_series_element_recovers_admittance(g, b):
    spec = AdmittanceSpectrum(np.array([1e9, 2e9]), np.array([g + 1j * b, 2 * g - 1j * b]) * 1e-3)
    net = series_element_network(spec)
    assert np.allclose(device_admittance(net).y, spec.y, rtol=1e-9)
    assert np.allclose(net.s21, net.s12)


def test_one_port_admittance():
    y = np.array([0.01 + 0.02j, 0.03 - 0.01j])
    s11 = (1 - 50 * y) / (1 + 50 * y)
    spec = one_port_admittance(Network([1e9, 2e9], s11, n_ports=1))
    assert np.allclose(spec.y, y)
    with pytest.raises(SingularConversionError):
        one_port_admittance(Network([1e9], np.array([-1.0 + 0j]), n_ports=1))


def test_group_delay_of_pure_delay():
    f = np.linspace(1e9, 2e9, 501)
    tau = 37e-9
    assert np.allclose(group_delay(f, np.exp(-2j * np.pi * f * tau)), tau, rtol=1e-9)
    with pytest.raises(NetworkError):
        group_delay(f[:2], np.ones(2))


def test_window_and_with_meta():
    net = Network(np.linspace(1e9, 2e9, 11), np.zeros((11, 2, 2)))
    w = net.window(1.2e9, 1.5e9)
    assert w.freqs[0] >= 1.2e9 and w.freqs[-1] <= 1.5e9
    assert net.with_meta(bias_voltage=3.0).meta.bias_voltage == 3.0
