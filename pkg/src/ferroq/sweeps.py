"""Bias and temperature sweep analytics.

Tunability, hysteresis branches, a coercive-field heuristic, temperature
coefficient of frequency and plain trend tables built from fit results.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

__all__ = [
    "SweepError",
    "SweepSeries",
    "Tunability",
    "CoerciveField",
    "TcfResult",
    "tunability",
    "split_hysteresis",
    "branch_separation",
    "coercive_field",
    "coercive_field_from_voltage",
    "tcf",
    "trend_table",
]

Direction = Literal["forward", "backward"]


class SweepError(ValueError):
    pass


@dataclass(frozen=True)
class SweepSeries:
    """Ordered ``(control, value)`` points of one sweep branch.

    ``control`` is a bias voltage (V) or temperature (K).
    """

    control: np.ndarray
    value: np.ndarray
    direction: Direction = "forward"
    quantity: str = ""

    def __post_init__(self):
        c = np.asarray(self.control, dtype=float).reshape(-1)
        v = np.asarray(self.value, dtype=float).reshape(-1)
        if c.shape != v.shape:
            raise SweepError(f"control ({c.size}) and value ({v.size}) differ in length")
        if self.direction not in ("forward", "backward"):
            raise SweepError(f"bad direction {self.direction!r}")
        d = np.diff(c)
        if c.size > 1 and not (np.all(d >= 0) or np.all(d <= 0)):
            raise SweepError("control values must be monotone within a branch")
        c.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "control", c)
        object.__setattr__(self, "value", v)

    def __len__(self) -> int:
        return self.control.size

    def rows(self) -> list[dict]:
        return [{"control": float(c), "value": float(v), "direction": self.direction}
                for c, v in zip(self.control, self.value)]


@dataclass(frozen=True)
class Tunability:
    control: np.ndarray
    shift: np.ndarray
    max_abs: float
    reference: float


def tunability(control, values, reference: float | None = None) -> Tunability:
    """Fractional shift ``(f(V) - f(0)) / f(0)``.

    ``reference`` overrides f(0); otherwise the point with control exactly 0
    is used (the first one if the sweep passes 0 twice).
    """
    c = np.asarray(control, dtype=float)
    f = np.asarray(values, dtype=float)
    if reference is None:
        zero = np.flatnonzero(c == 0)
        if zero.size == 0:
            raise SweepError("no zero-bias point to reference")
        reference = float(f[zero[0]])
    t = (f - reference) / reference
    return Tunability(c, t, float(np.max(np.abs(t))) if t.size else 0.0, float(reference))


def split_hysteresis(control, values, quantity: str = "") -> tuple[SweepSeries, SweepSeries]:
    """Split a sweep with at most one reversal into forward and backward branches.

    The turning point ends the forward branch; the backward branch holds the
    points after it, so concatenating the two gives back the input.

    Raises:
        SweepError: more than one direction reversal.
    """
    c = np.asarray(control, dtype=float)
    v = np.asarray(values, dtype=float)
    if c.shape != v.shape:
        raise SweepError("control and values differ in length")
    d = np.sign(np.diff(c))
    d = d[d != 0]
    flips = np.count_nonzero(np.diff(d)) if d.size else 0
    if flips > 1:
        raise SweepError(f"sweep reverses direction {flips} times (at most once allowed)")
    if flips == 0:
        return SweepSeries(c, v, "forward", quantity), SweepSeries([], [], "backward", quantity)
    k = int(np.argmax(c) if d[0] > 0 else np.argmin(c))  # first turning point
    return (SweepSeries(c[: k + 1], v[: k + 1], "forward", quantity),
            SweepSeries(c[k + 1:], v[k + 1:], "backward", quantity))


def branch_separation(fwd: SweepSeries, bwd: SweepSeries) -> tuple[np.ndarray, np.ndarray, float]:
    """``|fwd - bwd|`` on the common control range, and the control of its maximum.

    The backward branch is linearly interpolated onto the forward controls.
    """
    if len(fwd) < 2 or len(bwd) < 2:
        raise SweepError("both branches need >= 2 points")
    bc, bv = bwd.control, bwd.value
    if bc[0] > bc[-1]:
        bc, bv = bc[::-1], bv[::-1]
    fc, fv = fwd.control, fwd.value
    keep = (fc >= bc[0]) & (fc <= bc[-1])
    if not keep.any():
        raise SweepError("branches do not overlap")
    sep = np.abs(fv[keep] - np.interp(fc[keep], bc, bv))
    return fc[keep], sep, float(fc[keep][np.argmax(sep)])


@dataclass(frozen=True)
class CoerciveField:
    vc: float
    ec: float
    heuristic: bool = True

    def to_dict(self) -> dict:
        return {"vc": self.vc, "ec": self.ec, "ec_MV_per_m": self.ec / 1e6, "heuristic": self.heuristic}


def coercive_field_from_voltage(vc: float, gap: float) -> CoerciveField:
    """``Ec = |Vc| / gap``."""
    if not gap > 0:
        raise SweepError("gap must be > 0")
    return CoerciveField(float(vc), float(abs(vc) / gap))


def coercive_field(control, values, gap: float) -> CoerciveField:
    """Coercive voltage from the steepest point of C0(V) (or fs(V)).

    The derivative uses central differences; its extremum is refined by a
    parabola through the neighbouring points.  This is a heuristic: the
    permittivity changes fastest where domains switch.

    Raises:
        SweepError: fewer than 5 points, or the steepest point is at an end.
    """
    c = np.asarray(control, dtype=float)
    v = np.asarray(values, dtype=float)
    if c.size < 5:
        raise SweepError("coercive field needs >= 5 points")
    order = np.argsort(c, kind="stable")
    c, v = c[order], v[order]
    if np.any(np.diff(c) == 0):
        raise SweepError("repeated control values; split the hysteresis branches first")
    d = np.abs(np.gradient(v, c))
    k = int(np.argmax(d))
    if k == 0 or k == c.size - 1 or np.isclose(d[k], d[0]) or np.isclose(d[k], d[-1]):
        raise SweepError("steepest slope is at the sweep boundary; no interior coercive point")
    y0, y1, y2 = d[k - 1], d[k], d[k + 1]
    den = y0 - 2 * y1 + y2
    shift = 0.5 * (y0 - y2) / den if den != 0 else 0.0
    h = 0.5 * (c[k + 1] - c[k - 1])
    return coercive_field_from_voltage(c[k] + float(np.clip(shift, -0.5, 0.5)) * h, gap)


@dataclass(frozen=True)
class TcfResult:
    ppm_per_k: float
    r2: float
    f_ref: float
    t_ref: float

    def to_dict(self) -> dict:
        return {"tcf_ppm_per_K": self.ppm_per_k, "r2": self.r2, "f_ref": self.f_ref, "t_ref": self.t_ref}


def tcf(temps, freqs) -> TcfResult:
    """Temperature coefficient of frequency (ppm/K).

    Least-squares slope of f(T) divided by the fitted frequency at the median
    temperature.
    """
    t = np.asarray(temps, dtype=float)
    f = np.asarray(freqs, dtype=float)
    if t.size < 3:
        raise SweepError("TCF needs >= 3 temperature points")
    if np.ptp(t) == 0:
        raise SweepError("all temperatures are equal")
    t_ref = float(np.median(t))
    x = t - t_ref
    A = np.column_stack([x, np.ones_like(x)])
    (slope, f_ref), *_ = np.linalg.lstsq(A, f, rcond=None)
    resid = f - (slope * x + f_ref)
    ss = float(np.sum((f - f.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss if ss > 0 else 1.0
    return TcfResult(float(slope / f_ref * 1e6), r2, float(f_ref), t_ref)


def trend_table(rows: Sequence[dict], control: str, columns: Sequence[str]) -> list[dict]:
    """Select ``control`` plus ``columns`` (and ``direction`` when present) from fit rows."""
    out = []
    for r in rows:
        item = {control: r.get(control)}
        if r.get("sweep_direction") is not None:
            item["direction"] = r["sweep_direction"]
        for c in columns:
            item[c] = r.get(c)
        out.append(item)
    return out
