import numpy as np
import pytest

from ferroq.extract import (CapCalibration, ExtractionError, ForwardModel, calibrate_c_eps, extract_point,
                            extract_sweep, fit_piezo, invert_permittivity)
from ferroq.lamb1d import (Geometry, MaterialParams, build_model, build_regions, find_resonances,
                           harmonic_admittance)
from ferroq.mbvd import fit_mbvd

G = Geometry.bar_device()
TRUTH = MaterialParams(eps3=1800, c_eff=1.0e11, e_eff=12)
EPW = 24


@pytest.fixture(scope="module")
def truth_fit():
    m = build_model(G, build_regions(G, TRUTH), EPW)
    f = np.linspace(600e6, 800e6, 401)
    return fit_mbvd(harmonic_admittance(m, f))


@pytest.fixture(scope="module")
def cal():
    return calibrate_c_eps(G, (200, 1000, 3000), elements_per_wavelength=EPW)


def test_calibration_is_linear(cal):
    assert cal.max_deviation < 1e-9
    assert cal.slope > 0
    assert invert_permittivity(cal.capacitance(1234.0), cal) == pytest.approx(1234.0, rel=1e-9)


def test_invert_refuses_far_extrapolation(cal):
    with pytest.raises(ExtractionError):
        invert_permittivity(cal.capacitance(5000.0), cal)
    cal2 = CapCalibration(1.0, 0.0, 0.0, (100.0, 200.0))
    assert invert_permittivity(205.0, cal2) == 205.0


def test_calibration_rejects_bad_grid():
    with pytest.raises(ExtractionError):
        calibrate_c_eps(G, (100, 100, 200))


def test_forward_model_fallback_outside_grid():
    fwd = ForwardModel(G, np.linspace(100e6, 200e6, 101), None, EPW)
    obs = fwd.observe(TRUTH)
    assert not obs.fitted and obs.fp > obs.fs > 600e6


def test_fit_piezo_rejects_fp_below_uncoupled(truth_fit):
    fwd = ForwardModel(G, truth_fit.freqs, None, EPW)
    with pytest.raises(ExtractionError):
        fit_piezo(500e6, fwd, TRUTH)


def test_extract_point_recovers_uniform_truth(truth_fit, cal):
    start = MaterialParams(eps3=1000, c_eff=1.1e11, e_eff=5)
    p = extract_point(truth_fit, G, start, None, cal, elements_per_wavelength=EPW)
    assert p.ok
    assert p.material.eps3 == pytest.approx(TRUTH.eps3, rel=1e-5)
    assert p.material.c_eff == pytest.approx(TRUTH.c_eff, rel=1e-6)
    assert p.material.e_eff == pytest.approx(TRUTH.e_eff, rel=1e-5)
    assert len(p.passes) >= 2 and p.last_pass_change() < 1e-6
    # changes shrink pass after pass
    ch = [p.pass_change(k) for k in range(1, len(p.passes))]
    assert all(b < a for a, b in zip(ch, ch[1:]))
    d = p.to_dict()
    assert d["n_passes"] == len(p.passes) and all(abs(r) < 1e-6 for r in d["residual"].values())


def test_extract_point_needs_grid(truth_fit):
    empty = type(truth_fit)(truth_fit.params, 0.0, truth_fit.covariance, 0, True)
    with pytest.raises(ExtractionError):
        extract_point(empty, G, TRUTH, None)


def test_extract_sweep_requires_zero_bias(truth_fit):
    with pytest.raises(ExtractionError):
        extract_sweep([(3.0, truth_fit)], G)


def _uniform_fit(mat):
    m = build_model(G, build_regions(G, mat), EPW)
    f1 = m.mode_freqs[0]
    r = find_resonances(m, (0.7 * f1, 1.6 * f1))[0]
    span = r.fp - r.fs
    return fit_mbvd(harmonic_admittance(m, np.linspace(r.fs - 1.5 * span, r.fp + 1.5 * span, 401)))


def test_extraction_is_deterministic(truth_fit, cal):
    a = extract_point(truth_fit, G, TRUTH.with_(eps3=1200), None, cal, elements_per_wavelength=EPW)
    b = extract_point(truth_fit, G, TRUTH.with_(eps3=1200), None, cal, elements_per_wavelength=EPW)
    assert a.material == b.material and a.passes == b.passes


def test_constant_sweep_gives_constant_output():
    fit = _uniform_fit(TRUTH)
    pts = extract_sweep([(0.0, fit), (10.0, fit), (20.0, fit)], G, elements_per_wavelength=EPW)
    mats = [p.material for p in pts]
    for m in mats[1:]:
        for k in ("eps3", "c_eff", "e_eff"):
            assert getattr(m, k) == pytest.approx(getattr(mats[0], k), rel=1e-6)


@pytest.mark.slow
@pytest.mark.parametrize("eps", [600.0, 1500.0, 3000.0])
def test_round_trip_grid(eps, cal):
    for c in (0.9e11, 1.06e11, 1.2e11):
        for e in (3.0, 10.0, 20.0):
            truth = MaterialParams(eps3=eps, c_eff=c, e_eff=e)
            p = extract_point(_uniform_fit(truth), G, MaterialParams(eps3=1000, c_eff=1e11, e_eff=5), None, cal,
                              elements_per_wavelength=EPW)
            assert p.material.eps3 == pytest.approx(eps, rel=0.01)
            assert p.material.c_eff == pytest.approx(c, rel=0.01)
            assert p.material.e_eff == pytest.approx(e, rel=0.02)
