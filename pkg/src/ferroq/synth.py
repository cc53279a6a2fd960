"""Synthetic ground-truth data: mBVD spectra, bias sweeps and delay-line sets.

Every generator is deterministic for a given seed.  Noise is multiplicative
complex Gaussian, ``x (1 + rel (g1 + j g2) / sqrt(2))``, so ``rel`` is the
RMS relative deviation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .lamb1d import (Geometry, MaterialParams, build_model, build_regions, find_resonances,
                     harmonic_admittance)
from .mbvd import MbvdParams, y_mbvd
from .network import AdmittanceSpectrum, Metadata, Network, series_element_network

__all__ = [
    "multiplicative_noise",
    "synth_mbvd_admittance",
    "synth_mbvd_network",
    "Trajectory",
    "bias_trajectories",
    "sweep_regions",
    "simulate_admittance",
    "synth_sweep",
    "DelayLineSet",
    "synth_adl",
]

Trajectory = Callable[[float], float] | Sequence[float]


def multiplicative_noise(x: np.ndarray, rel: float, rng: np.random.Generator) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if rel == 0:
        return x.copy()
    g = rng.standard_normal(x.shape + (2,))
    return x * (1 + rel * (g[..., 0] + 1j * g[..., 1]) / math.sqrt(2))


def synth_mbvd_admittance(p: MbvdParams, freqs, noise_rel: float = 0.0, seed: int = 0) -> AdmittanceSpectrum:
    """mBVD admittance with optional noise applied directly to Y."""
    y = y_mbvd(p, freqs)
    rng = np.random.default_rng(seed)
    return AdmittanceSpectrum(y.freqs, multiplicative_noise(y.y, noise_rel, rng))


def synth_mbvd_network(p: MbvdParams, freqs, z0: float = 50.0, noise_rel: float = 0.0,
                       seed: int = 0, meta: Metadata | None = None) -> Network:
    """Two-port S-parameters of an mBVD element in series between the ports.

    Noise is applied to each S entry independently (reciprocity is not
    preserved under noise, as with a real VNA).
    """
    net = series_element_network(y_mbvd(p, freqs), z0, meta)
    if noise_rel == 0:
        return net
    rng = np.random.default_rng(seed)
    return Network(net.freqs, multiplicative_noise(net.s, noise_rel, rng), z0, net.meta)


def _at(traj: Trajectory, voltages: np.ndarray) -> np.ndarray:
    if callable(traj):
        return np.array([float(traj(v)) for v in voltages])
    a = np.asarray(traj, dtype=float)
    if a.shape != voltages.shape:
        raise ValueError(f"trajectory has {a.size} values for {voltages.size} voltages")
    return a


def bias_trajectories(v_max: float = 39.0) -> dict[str, Callable[[float], float]]:
    """Bias trajectories shaped like the measured BTO film.

    Permittivity falls 2300 -> 700 (3.3x) as a Lorentzian in V, stiffness
    softens 7% linearly in |V|, and the piezoelectric coefficient rises from
    a weak as-deposited value, peaks near 0.5 v_max and tapers afterwards.
    """
    v0 = 12.0
    lor_end = 1 / (1 + (v_max / v0) ** 2)
    eps_min = (700 - 2300 * lor_end) / (1 - lor_end)

    def eps3(v):
        return eps_min + (2300 - eps_min) / (1 + (v / v0) ** 2)

    def c_eff(v):
        return 1.06e11 * (1 - 0.07 * abs(v) / v_max)

    def e_eff(v):
        x = abs(v) / (0.5 * v_max)
        return 4.0 + 16.0 * x * math.exp(1 - x)

    return {"eps3": eps3, "c_eff": c_eff, "e_eff": e_eff}


def sweep_regions(g: Geometry, baseline: MaterialParams, biased: MaterialParams | None = None):
    """Uniform baseline cell, with the electrode gaps replaced by ``biased`` when given."""
    return build_regions(g, biased or baseline, baseline)


def simulate_admittance(g: Geometry, baseline: MaterialParams, biased: MaterialParams | None,
                        freqs, elements_per_wavelength: int = 40) -> AdmittanceSpectrum:
    m = build_model(g, sweep_regions(g, baseline, biased), elements_per_wavelength)
    return harmonic_admittance(m, freqs)


def synth_sweep(eps3: Trajectory, c_eff: Trajectory, e_eff: Trajectory, g: Geometry,
                voltages, noise_rel: float = 0.0, seed: int = 0,
                template: MaterialParams | None = None, freqs=None, n_points: int = 801,
                z0: float = 50.0, elements_per_wavelength: int = 40) -> list[tuple[float, Network]]:
    """Simulated two-port bias sweep.

    The gap material at each voltage takes the trajectory values; the rest of
    the cell keeps the values at V = 0 (the first voltage if 0 is absent).
    ``template`` supplies rho, q_mech and tan_delta.  With ``freqs=None`` a
    common uniform grid covering the fundamental at every bias is chosen.
    """
    v = np.asarray(voltages, dtype=float)
    eps, cc, ee = _at(eps3, v), _at(c_eff, v), _at(e_eff, v)
    tpl = template or MaterialParams(eps3=1000.0, c_eff=1e11, e_eff=0.0)
    k0 = int(np.argmin(np.abs(v)))
    base = tpl.with_(eps3=eps[k0], c_eff=cc[k0], e_eff=ee[k0])
    mats = [tpl.with_(eps3=a, c_eff=b, e_eff=c) for a, b, c in zip(eps, cc, ee)]
    models = [build_model(g, sweep_regions(g, base, m), elements_per_wavelength) for m in mats]
    if freqs is None:
        fs, fp = [], []
        for m in models:
            f1 = m.mode_freqs[0]
            r = find_resonances(m, (0.7 * f1, 1.3 * f1))[0]
            fs.append(r.fs)
            fp.append(r.fp)
        span = max(b - a for a, b in zip(fs, fp))
        freqs = np.linspace(min(fs) - 1.5 * span, max(fp) + 1.5 * span, n_points)
    freqs = np.asarray(freqs, dtype=float)
    rng = np.random.default_rng(seed)
    out = []
    for vk, m in zip(v, models):
        y = harmonic_admittance(m, freqs)
        net = series_element_network(y, z0, Metadata(bias_voltage=float(vk)))
        if noise_rel:
            net = Network(net.freqs, multiplicative_noise(net.s, noise_rel, rng), z0, net.meta)
        out.append((float(vk), net))
    return out


@dataclass(frozen=True)
class DelayLineSet:
    """Transmission measurements of delay lines of different length.

    Attributes:
        records: ``(length_m, network)`` pairs.
        center_freq: f0 (Hz).
        band: ``(f_lo, f_hi)`` analysis band (Hz).
    """

    records: tuple[tuple[float, Network], ...]
    center_freq: float
    band: tuple[float, float]

    def __post_init__(self):
        recs = tuple((float(L), n) for L, n in self.records)
        lengths = [L for L, _ in recs]
        if any(L <= 0 for L in lengths):
            raise ValueError("delay lengths must be > 0")
        if len(set(lengths)) < 3:
            raise ValueError(f"need >= 3 distinct delay lengths, got {len(set(lengths))}")
        if not self.band[0] < self.band[1]:
            raise ValueError("band must be (f_lo, f_hi) with f_lo < f_hi")
        object.__setattr__(self, "records", recs)
        object.__setattr__(self, "band", (float(self.band[0]), float(self.band[1])))

    @property
    def lengths(self) -> np.ndarray:
        return np.array([L for L, _ in self.records])


def _skirt(freqs: np.ndarray, band: tuple[float, float], f_lo: float, f_hi: float) -> np.ndarray:
    """1 inside ``band``, cosine-squared roll-off to 0 at the grid edges."""
    out = np.ones_like(freqs)
    lo = freqs < band[0]
    out[lo] = np.sin(0.5 * np.pi * (freqs[lo] - f_lo) / (band[0] - f_lo)) ** 2
    hi = freqs > band[1]
    out[hi] = np.sin(0.5 * np.pi * (f_hi - freqs[hi]) / (f_hi - band[1])) ** 2
    return out


def synth_adl(alpha: float, vg: float, lengths, f0: float = 1.65e9,
              band: tuple[float, float] | None = None, transducer_il_db: float = 10.0,
              seed: int = 0, noise_rel: float = 0.0, echo: float = 0.0,
              df: float = 1e6, span: float | None = None) -> DelayLineSet:
    """Non-dispersive delay lines ``S21 = a_t exp(-alpha L) exp(-j 2 pi f L / vg)``.

    The measured grid spans ``span`` (default twice the band width) around
    ``f0`` at spacing ``df``; outside ``band`` the transducer response rolls
    off smoothly.  ``echo > 0`` adds a triple-transit arrival at ``3 L`` of
    relative amplitude ``echo``.
    """
    if not (alpha > 0 and vg > 0):
        raise ValueError("alpha and vg must be > 0")
    band = band or (f0 - 100e6, f0 + 100e6)
    span = span or 2 * (band[1] - band[0])
    n = int(round(span / df)) + 1
    freqs = f0 - span / 2 + df * np.arange(n)
    shape = _skirt(freqs, band, freqs[0] - df, freqs[-1] + df)
    a_t = 10 ** (-transducer_il_db / 20)
    rng = np.random.default_rng(seed)
    recs = []
    for L in lengths:
        s21 = a_t * shape * np.exp(-alpha * L - 2j * np.pi * freqs * L / vg)
        if echo:
            s21 = s21 + echo * a_t * shape * np.exp(-3 * alpha * L - 6j * np.pi * freqs * L / vg)
        s21 = multiplicative_noise(s21, noise_rel, rng)
        s = np.zeros((n, 2, 2), complex)
        s[:, 1, 0] = s[:, 0, 1] = s21
        recs.append((float(L), Network(freqs, s, 50.0, Metadata(delay_length=float(L)))))
    return DelayLineSet(tuple(recs), f0, band)
