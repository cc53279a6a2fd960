import numpy as np
import pytest

from ferroq.lamb1d import Geometry
from ferroq.mbvd import MbvdParams
from ferroq.synth import (DelayLineSet, multiplicative_noise, bias_trajectories, synth_adl,
                          synth_mbvd_admittance, synth_mbvd_network, synth_sweep)

P = MbvdParams.from_resonance(700e6, 740e6, 200e-15, 300)
F = np.linspace(650e6, 800e6, 201)


def test_noise_statistics():
    x = np.ones(200_000, complex)
    y = multiplicative_noise(x, 0.01, np.random.default_rng(0))
    assert np.std(y - 1) == pytest.approx(0.01, rel=0.02)
    assert np.array_equal(multiplicative_noise(x, 0, None), x)


def test_synth_is_deterministic():
    a = synth_mbvd_admittance(P, F, 0.01, seed=5).y
    b = synth_mbvd_admittance(P, F, 0.01, seed=5).y
    c = synth_mbvd_admittance(P, F, 0.01, seed=6).y
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    n1 = synth_mbvd_network(P, F, noise_rel=0.01, seed=2)
    n2 = synth_mbvd_network(P, F, noise_rel=0.01, seed=2)
    assert np.array_equal(n1.s, n2.s)


def test_bias_trajectories_shape():
    tr = bias_trajectories()
    assert tr["eps3"](0) / tr["eps3"](39) == pytest.approx(2300 / 700, rel=0.05)
    e = [tr["e_eff"](v) for v in np.arange(0, 40, 3.0)]
    k = int(np.argmax(e))
    assert 0 < k < len(e) - 1  # rises then tapers
    assert tr["c_eff"](39) < tr["c_eff"](0)


def test_sweep_signatures():
    tr = bias_trajectories()
    sw = synth_sweep(tr["eps3"], tr["c_eff"], tr["e_eff"], Geometry.bar_device(), [0.0, 18.0, 39.0],
                     elements_per_wavelength=24)
    assert [v for v, _ in sw] == [0.0, 18.0, 39.0]
    assert all(np.array_equal(sw[0][1].freqs, n.freqs) for _, n in sw)
    assert sw[1][1].meta.bias_voltage == 18.0


def test_adl_set_validation():
    d = synth_adl(7000.0, 4000.0, [1e-4, 2e-4, 3e-4])
    assert d.lengths.tolist() == [1e-4, 2e-4, 3e-4]
    with pytest.raises(ValueError):
        DelayLineSet(d.records[:2], d.center_freq, d.band)
    with pytest.raises(ValueError):
        synth_adl(-1.0, 4000.0, [1e-4, 2e-4, 3e-4])
