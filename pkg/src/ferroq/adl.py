"""Acoustic delay-line analysis: time gating, loss/delay regression, film Q.

Propagation loss is kept in nepers per metre throughout, which makes the
film quality factor ``Q = pi f0 / (alpha vg)`` the standard ``w / (2 alpha vg)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.signal.windows import tukey

from .network import group_delay
from .synth import DelayLineSet

__all__ = [
    "GateError",
    "NP_PER_DB",
    "db_to_np",
    "np_to_db",
    "db_per_us_to_np_per_m",
    "np_per_m_to_db_per_us",
    "time_axis",
    "time_gate",
    "auto_gate",
    "il_and_delay",
    "PropagationResult",
    "regress_propagation",
    "q_from_propagation",
]

NP_PER_DB = math.log(10) / 20


class GateError(ValueError):
    pass


def db_to_np(x):
    return np.asarray(x) * NP_PER_DB if np.ndim(x) else x * NP_PER_DB


def np_to_db(x):
    return np.asarray(x) / NP_PER_DB if np.ndim(x) else x / NP_PER_DB


def db_per_us_to_np_per_m(loss_db_per_us: float, vg: float) -> float:
    """Temporal loss rate (dB/us) to spatial loss (Np/m) at group velocity ``vg``."""
    return loss_db_per_us * NP_PER_DB / (vg * 1e-6)


def np_per_m_to_db_per_us(alpha: float, vg: float) -> float:
    return alpha * vg * 1e-6 / NP_PER_DB


def _uniform(freqs: np.ndarray) -> bool:
    d = np.diff(freqs)
    return bool(np.all(np.abs(d - d.mean()) <= 1e-9 * abs(d.mean())))


def time_axis(freqs) -> np.ndarray:
    """Times ``k / (N df)`` of the inverse transform, covering ``[0, 1/df)``."""
    freqs = np.asarray(freqs, dtype=float)
    df = (freqs[-1] - freqs[0]) / (freqs.size - 1)
    return np.arange(freqs.size) / (freqs.size * df)


def _band_window(n: int, window: str, taper: float) -> np.ndarray:
    if window == "rectangular":
        return np.ones(n)
    if window == "raised_cosine":
        # drop the zero end points so the window can be divided out everywhere
        return tukey(n + 2, taper)[1:-1]
    raise GateError(f"unknown window {window!r}")


def _gate_shape(t: np.ndarray, start: float, stop: float, edge: float) -> np.ndarray:
    w = edge * (stop - start)
    g = ((t >= start) & (t <= stop)).astype(float)
    if w > 0:
        rise = (t >= start) & (t < start + w)
        g[rise] = 0.5 - 0.5 * np.cos(np.pi * (t[rise] - start) / w)
        fall = (t > stop - w) & (t <= stop)
        g[fall] = 0.5 - 0.5 * np.cos(np.pi * (stop - t[fall]) / w)
    return g


def time_gate(freqs, s21, gate_start: float, gate_stop: float,
              window: Literal["raised_cosine", "rectangular"] = "raised_cosine",
              taper: float = 0.5, edge: float = 0.05) -> np.ndarray:
    """Keep only the arrivals between ``gate_start`` and ``gate_stop`` (s).

    The band window is divided out again after gating.  It never reaches
    zero, so the operation is exactly idempotent for a gate without edges;
    the outermost few points are strongly amplified and should not be used
    for loss estimates.  Non-uniform grids are resampled linearly (with a
    warning) and the result interpolated back.

    Raises:
        GateError: gate outside ``[0, 1/df)`` or empty.
    """
    freqs = np.asarray(freqs, dtype=float)
    s21 = np.asarray(s21, dtype=complex)
    if freqs.size < 4:
        raise GateError("time gating needs >= 4 frequency points")
    if not _uniform(freqs):
        warnings.warn("non-uniform frequency grid resampled for time gating", stacklevel=2)
        fu = np.linspace(freqs[0], freqs[-1], freqs.size)
        su = np.interp(fu, freqs, s21.real) + 1j * np.interp(fu, freqs, s21.imag)
        g = time_gate(fu, su, gate_start, gate_stop, window, taper, edge)
        return np.interp(freqs, fu, g.real) + 1j * np.interp(freqs, fu, g.imag)
    t = time_axis(freqs)
    t_max = t[1] * freqs.size
    if not (0 <= gate_start < gate_stop <= t_max):
        raise GateError(f"gate [{gate_start:.4g}, {gate_stop:.4g}] s outside the unambiguous range [0, {t_max:.4g}) s")
    w = _band_window(freqs.size, window, taper)
    x = np.fft.ifft(s21 * w)
    y = np.fft.fft(x * _gate_shape(t, gate_start, gate_stop, edge))
    return y / w


def _peak_time(freqs, s21, window="raised_cosine", taper=0.5) -> float:
    t = time_axis(freqs)
    mag = np.abs(np.fft.ifft(np.nan_to_num(np.asarray(s21, complex)) * _band_window(len(t), window, taper)))
    k = int(np.argmax(mag))
    if 0 < k < t.size - 1:
        y0, y1, y2 = np.log(mag[k - 1:k + 2] + 1e-300)
        den = y0 - 2 * y1 + y2
        if den < 0:
            return float(t[k] + 0.5 * (y0 - y2) / den * t[1])
    return float(t[k])


def auto_gate(freqs, s21, half_width: float | None = None) -> tuple[float, float]:
    """Gate centred on the strongest arrival; half width defaults to half its delay."""
    tp = _peak_time(freqs, s21)
    hw = 0.5 * tp if half_width is None else half_width
    t_max = time_axis(freqs)[1] * len(freqs)
    return max(0.0, tp - hw), min(t_max, tp + hw)


def il_and_delay(freqs, s21, band: tuple[float, float]) -> tuple[float, float]:
    """Insertion loss ``-20 log10 mean|S21|`` (dB) and mean group delay (s) in ``band``."""
    freqs = np.asarray(freqs, dtype=float)
    s21 = np.asarray(s21, dtype=complex)
    sel = (freqs >= band[0]) & (freqs <= band[1])
    if np.count_nonzero(sel) < 3:
        raise GateError(f"band [{band[0]:g}, {band[1]:g}] Hz holds fewer than 3 points")
    idx = np.flatnonzero(sel)
    lo, hi = idx[0], idx[-1] + 1
    seg = s21[lo:hi]
    if np.any(~np.isfinite(seg)):
        raise GateError("non-finite values in band")
    tau = group_delay(freqs[lo:hi], seg)
    return float(-20 * np.log10(np.mean(np.abs(seg)))), float(np.mean(tau))


def _linfit(x, y):
    A = np.column_stack([x, np.ones_like(x)])
    (m, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - (m * x + b)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(r @ r) / ss if ss > 0 else 1.0
    return float(m), float(b), r2


@dataclass(frozen=True)
class PropagationResult:
    """Propagation constants from a delay-line regression.

    ``alpha`` is in Np/m; intercepts hold the transducer loss (dB) and
    latency (s).
    """

    alpha: float
    vg: float
    r2_il: float
    r2_tau: float
    il_intercept_db: float
    tau_intercept: float
    lengths: np.ndarray
    il_db: np.ndarray
    tau: np.ndarray
    gated: bool
    warnings: list[str] = field(default_factory=list)

    def table(self) -> list[dict]:
        return [{"length_m": float(L), "il_db": float(a), "tau_s": float(t)}
                for L, a, t in zip(self.lengths, self.il_db, self.tau)]

    def to_dict(self) -> dict:
        return {"alpha_np_per_m": self.alpha, "alpha_db_per_m": self.alpha / NP_PER_DB, "vg_m_per_s": self.vg,
                "r2_il": self.r2_il, "r2_tau": self.r2_tau, "il_intercept_db": self.il_intercept_db,
                "tau_intercept_s": self.tau_intercept, "gated": self.gated, "warnings": list(self.warnings),
                "loss_units": "Np/m"}


def regress_propagation(dset: DelayLineSet, gate: Literal["auto"] | None = "auto",
                        half_width: float | None = None, band: tuple[float, float] | None = None,
                        window: Literal["raised_cosine", "rectangular"] = "raised_cosine") -> PropagationResult:
    """Loss and delay versus length, with optional automatic gating.

    With ``gate="auto"`` every line is gated around its strongest arrival
    using one common half width (default half the shortest delay) so the
    window bias is the same for all lengths and ends up in the intercepts.

    Raises:
        GateError: fewer than 3 distinct lengths.
    """
    lengths = dset.lengths
    if np.unique(lengths).size < 3:
        raise GateError("need >= 3 distinct delay lengths")
    band = band or dset.band
    il, tau = [], []
    peaks = [_peak_time(n.freqs, n.s21) for _, n in dset.records] if gate == "auto" else []
    hw = half_width if half_width is not None else (0.5 * min(peaks) if peaks else None)
    for k, (L, net) in enumerate(dset.records):
        s21 = net.s21
        if gate == "auto":
            t_max = time_axis(net.freqs)[1] * len(net)
            s21 = time_gate(net.freqs, s21, max(0.0, peaks[k] - hw), min(t_max, peaks[k] + hw), window)
        elif gate is not None:
            raise GateError(f"unknown gate mode {gate!r}")
        a, t = il_and_delay(net.freqs, s21, band)
        il.append(a)
        tau.append(t)
    il, tau = np.array(il), np.array(tau)
    alpha, il0, r2_il = _linfit(lengths, il * NP_PER_DB)
    inv_vg, tau0, r2_tau = _linfit(lengths, tau)
    notes = []
    if alpha <= 0:
        notes.append("fitted loss is negative (gain); nonphysical")
        warnings.warn(notes[-1], stacklevel=2)
    vg = 1 / inv_vg if inv_vg != 0 else math.inf
    if not vg > 0:
        notes.append("fitted group velocity is not positive")
        warnings.warn(notes[-1], stacklevel=2)
    return PropagationResult(alpha, vg, r2_il, r2_tau, il0 / NP_PER_DB, tau0, lengths, il, tau,
                             gate is not None, notes)


def q_from_propagation(f0: float, alpha: float, vg: float) -> float | None:
    """Film Q ``pi f0 / (alpha vg)`` with alpha in Np/m; ``None`` for alpha <= 0."""
    if not vg > 0:
        raise ValueError("vg must be > 0")
    if not alpha > 0:
        warnings.warn("non-positive propagation loss; Q undefined", stacklevel=2)
        return None
    return math.pi * f0 / (alpha * vg)
