"""Acceptance criteria, one test per criterion.

Each test prints a PASS/FAIL line through the ``acceptance`` fixture before
asserting, so the summary lists every criterion even when some fail.
"""
import math
import time

import numpy as np
import pytest

from ferroq.adl import q_from_propagation, regress_propagation
from ferroq.extract import extract_sweep
from ferroq.lamb1d import (Geometry, MaterialParams, Region, bar_frequency, build_model, build_regions,
                           find_resonances, harmonic_admittance, modal_admittance)
from ferroq.mbvd import MbvdParams, compute_fom, fit_mbvd, y_mbvd
from ferroq.network import AdmittanceSpectrum, device_admittance
from ferroq.sweeps import coercive_field_from_voltage, tcf
from ferroq.synth import multiplicative_noise, bias_trajectories, synth_adl, synth_sweep
from ferroq.touchstone import TouchstoneError, parse_touchstone, write_touchstone

from touchstone_corpus import MALFORMED, random_touchstone


def test_ac01_fom_arithmetic(acceptance):
    t = time.perf_counter()
    fs, fp = 707e6, 772e6
    c0 = 200e-15
    p = MbvdParams.from_resonance(fs, fp, c0, q=200.0)
    k2 = compute_fom(p).k2
    dt = time.perf_counter() - t
    reported = 0.246
    closest = min(("freq_sep", "pi2_8", "ieee_176", "cm_ratio"), key=lambda k: abs(k2[k] - reported))
    ok = (abs(k2["freq_sep"] - 0.161) <= 0.001 and abs(k2["pi2_8"] - 0.237) <= 0.001
          and closest == "pi2_8" and dt < 1.0)
    acceptance(1, "FOM arithmetic", ok,
               f"freq_sep={k2['freq_sep']:.4f} pi2_8={k2['pi2_8']:.4f} closest to 0.246: {closest} "
               f"(gap {abs(k2['pi2_8'] - reported):.3f}) t={dt:.3f}s")
    assert ok


def test_ac02_coercive_field(acceptance):
    t = time.perf_counter()
    cf = coercive_field_from_voltage(-3.0, 1.35e-6)
    dt = time.perf_counter() - t
    ok = abs(cf.ec - 2.2222e6) < 1e3 and abs(cf.ec / 2e6 - 1) <= 0.15 and dt < 1.0
    acceptance(2, "coercive field", ok, f"Ec={cf.ec / 1e6:.3f} MV/m t={dt:.3f}s")
    assert ok


def test_ac03_q_identity(acceptance):
    t = time.perf_counter()
    f0 = 1.65e9
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        vg = 10 ** rng.uniform(2, 4)
        alpha = math.pi * f0 / (169 * vg)
        worst = max(worst, abs(q_from_propagation(f0, alpha, vg) / 169 - 1))
    dt = time.perf_counter() - t
    ok = worst <= 1e-12 and dt < 1.0
    acceptance(3, "Q identity", ok, f"max rel err={worst:.1e} t={dt:.3f}s")
    assert ok


def test_ac04_tcf(acceptance):
    t = time.perf_counter()
    temps = np.linspace(250, 350, 21)
    f_ref, t_ref, ppm = 700e6, 300.0, 58.3
    freqs = f_ref * (1 + ppm * 1e-6 * (temps - t_ref))
    r = tcf(temps, freqs)
    dt = time.perf_counter() - t
    err = abs(r.ppm_per_k / ppm - 1)
    ok = err <= 1e-9 and dt < 1.0
    acceptance(4, "TCF recovery", ok, f"tcf={r.ppm_per_k:.12f} ppm/K rel err={err:.1e} t={dt:.3f}s")
    assert ok


def _mc_case(seed):
    rng = np.random.default_rng(seed)
    fs = rng.uniform(650e6, 750e6)
    fp = fs * rng.uniform(1.02, 1.12)
    c0 = 10 ** rng.uniform(-13.3, -11.5)
    p = MbvdParams.from_resonance(fs, fp, c0, rng.uniform(80, 600),
                                  r0=rng.uniform(0.002, 0.03) / (2 * np.pi * fs * c0),
                                  rs=rng.uniform(0.5, 5))
    f = np.linspace(fs - 1.5 * (fp - fs), fp + 1.5 * (fp - fs), 401)
    return p, f, rng


def test_ac05_mbvd_monte_carlo(acceptance):
    t = time.perf_counter()
    clean = np.zeros(6)
    noisy = np.zeros(6)
    for seed in range(100):
        p, f, rng = _mc_case(seed)
        y = y_mbvd(p, f).y
        e = np.abs(fit_mbvd(AdmittanceSpectrum(f, y)).params.as_array() / p.as_array() - 1)
        clean = np.maximum(clean, e)
        yn = multiplicative_noise(y, 0.01, rng)
        e = np.abs(fit_mbvd(AdmittanceSpectrum(f, yn)).params.as_array() / p.as_array() - 1)
        noisy = np.maximum(noisy, e)
    dt = time.perf_counter() - t
    # order: r0 c0 rs rm lm cm
    ok = (clean.max() <= 1e-3 and noisy[1] <= 0.01 and noisy[4] <= 0.01 and noisy[5] <= 0.01
          and noisy[3] <= 0.10 and dt < 60)
    acceptance(5, "mBVD Monte-Carlo", ok,
               f"noiseless worst={clean.max():.1e}; 1% noise c0={noisy[1]:.2%} lm={noisy[4]:.2%} "
               f"cm={noisy[5]:.2%} rm={noisy[3]:.2%} t={dt:.1f}s")
    assert ok


@pytest.mark.slow
def test_ac06_extraction_round_trip(acceptance):
    t = time.perf_counter()
    tr = bias_trajectories()
    g = Geometry.bar_device()
    volts = np.arange(0, 40, 3.0)
    sweep = synth_sweep(tr["eps3"], tr["c_eff"], tr["e_eff"], g, volts)
    fits = [(v, fit_mbvd(device_admittance(net))) for v, net in sweep]
    foms = [compute_fom(f.params) for _, f in fits]
    res = extract_sweep(fits, g, jobs=4)
    dt = time.perf_counter() - t
    errs = np.array([[abs(r.material.eps3 / tr["eps3"](r.voltage) - 1),
                      abs(r.material.c_eff / tr["c_eff"](r.voltage) - 1),
                      abs(r.material.e_eff / tr["e_eff"](r.voltage) - 1)] if r.ok else [np.inf] * 3
                     for r in res])
    fs = np.array([f.fs for f in foms])
    fp = np.array([f.fp for f in foms])
    fs_drop = 1 - fs[-1] / fs[0]
    fp_rise = fp[-1] / fp[0] - 1
    ok = (errs[:, 0].max() <= 0.01 and errs[:, 1].max() <= 0.01 and errs[:, 2].max() <= 0.02
          and np.all(np.diff(fs) < 0) and fs_drop >= 0.02 and fp_rise >= 0.04 and dt < 600)
    acceptance(6, "extraction round trip", ok,
               f"max err eps={errs[:, 0].max():.1e} c={errs[:, 1].max():.1e} e={errs[:, 2].max():.1e}; "
               f"fs -{fs_drop:.2%} (monotone {bool(np.all(np.diff(fs) < 0))}) fp +{fp_rise:.2%} t={dt:.0f}s")
    assert ok


def test_ac07_forward_physics(acceptance):
    t = time.perf_counter()
    g = Geometry.bar_device()
    notes = []
    # weak coupling against the free bar
    weak = MaterialParams(eps3=1000, c_eff=1.06e11, e_eff=0.5, q_mech=1e4)
    m = build_model(g, build_regions(g, weak))
    f1 = bar_frequency(g.cell_width, weak.c_eff, weak.rho)
    r = find_resonances(m, (0.8 * f1, 1.2 * f1))[0]
    weak_ok = abs(r.fs / f1 - 1) <= 0.02
    notes.append(f"weak fs/f_bar-1={r.fs / f1 - 1:.1e}")
    # N-cell scaling
    mat = MaterialParams(eps3=1500, c_eff=1.06e11, e_eff=15)
    m = build_model(g, build_regions(g, mat))
    f = np.linspace(600e6, 800e6, 201)
    y1 = harmonic_admittance(m, f, n_cells=1).y
    yn = harmonic_admittance(m, f, n_cells=15).y
    scale = float(np.max(np.abs(yn / (15 * y1) - 1)))
    scale_ok = scale <= 1e-12
    notes.append(f"scaling err={scale:.1e}")
    # gap split into two oppositely poled halves versus aligned poling
    (a, b, _), = g.active_gaps()
    h = 0.5 * (b - a)
    def regions(sign2):
        return (Region(a, mat), Region(h, mat, 1, True), Region(h, mat, sign2, True),
                Region(g.cell_width - b, mat))
    m_al = build_model(g, regions(1))
    m_op = build_model(g, regions(-1))
    fr = np.linspace(0.9, 1.1, 41) * m_al.mode_freqs[0]
    y_al = np.abs(modal_admittance(m_al, fr, 0)).max()
    y_op = np.abs(modal_admittance(m_op, fr, 0)).max()
    supp = 20 * np.log10(y_al / max(y_op, 1e-300))
    pol_ok = supp >= 120
    notes.append(f"poling suppression={min(supp, 999):.0f} dB")
    # split-electrode layout
    gs = Geometry.split_device()
    ms = build_model(gs, build_regions(gs, mat))
    res = find_resonances(ms, (0.5 * ms.mode_freqs[0], 1.1 * ms.mode_freqs[2]))
    k2 = {}
    for rr in res:
        k2[rr.mode_order] = max(k2.get(rr.mode_order, 0.0), (rr.fp**2 - rr.fs**2) / rr.fp**2)
    split_ok = 3 in k2 and 1 in k2 and k2[3] == max(k2.values()) and k2[1] > 0
    notes.append("split k2 " + " ".join(f"m{k}={v:.2%}" for k, v in sorted(k2.items())))
    dt = time.perf_counter() - t
    ok = weak_ok and scale_ok and pol_ok and split_ok and dt < 300
    acceptance(7, "forward-model physics", ok, "; ".join(notes) + f" t={dt:.1f}s")
    assert ok


def test_ac08_adl_pipeline(acceptance):
    t = time.perf_counter()
    f0, vg = 1.65e9, 4000.0
    alpha = math.pi * f0 / (169 * vg)
    lengths = np.linspace(100e-6, 300e-6, 5)
    dset = synth_adl(alpha, vg, lengths, f0, echo=0.3, seed=8, noise_rel=1e-3)
    band = (f0 - 5e6, f0 + 5e6)
    out = {}
    for mode in ("auto", None):
        r = regress_propagation(dset, gate=mode, band=band)
        q = q_from_propagation(f0, r.alpha, r.vg)
        out[mode] = np.abs([r.alpha / alpha - 1, r.vg / vg - 1, q / 169 - 1])
    dt = time.perf_counter() - t
    gated, raw = out["auto"], out[None]
    ok = gated.max() <= 0.01 and raw.max() > 0.01 and raw.max() > gated.max() and dt < 60
    acceptance(8, "ADL pipeline", ok,
               f"gated err a/vg/Q={gated[0]:.1e}/{gated[1]:.1e}/{gated[2]:.1e}; "
               f"ungated={raw[0]:.1e}/{raw[1]:.1e}/{raw[2]:.1e} t={dt:.1f}s")
    assert ok


def test_ac09_bode_q(acceptance):
    t = time.perf_counter()
    p = MbvdParams.from_resonance(700e6, 740e6, 1e-12, q=500.0)
    q = compute_fom(p).q_bode_max
    dt = time.perf_counter() - t
    ok = q is not None and abs(q / 500 - 1) <= 0.05 and dt < 10
    acceptance(9, "Bode Q consistency", ok, f"Bode Q={q:.1f} t={dt:.2f}s")
    assert ok


def test_ac10_parser_corpus(acceptance):
    t = time.perf_counter()
    worst = 0.0
    for seed in range(100):
        a = parse_touchstone(random_touchstone(seed))
        b = parse_touchstone(write_touchstone(a))
        assert a.z0 == b.z0 and a.meta == b.meta
        worst = max(worst, float(np.max(np.abs(a.freqs - b.freqs) / np.abs(a.freqs))),
                    float(np.max(np.abs(a.s - b.s) / np.maximum(np.abs(a.s), 1e-300))))
    flagged = 0
    for _, text, line in MALFORMED:
        try:
            parse_touchstone(text)
        except TouchstoneError as exc:
            flagged += exc.line == line and f"line {line}" in str(exc)
    dt = time.perf_counter() - t
    ok = worst <= 1e-12 and flagged == len(MALFORMED) and len(MALFORMED) >= 10 and dt < 10
    acceptance(10, "parser corpus", ok,
               f"round-trip worst={worst:.1e}; {flagged}/{len(MALFORMED)} malformed with line numbers t={dt:.2f}s")
    assert ok
