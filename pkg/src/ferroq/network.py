"""Frequency-domain network data and S/Y/Z conversions.

Two-port data is held as an ``(N, 2, 2)`` complex array referenced to a real
impedance ``z0``.  One-port data uses the same container with the S12, S21 and
S22 entries set to NaN and ``n_ports == 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

__all__ = [
    "Metadata",
    "Network",
    "AdmittanceSpectrum",
    "NetworkError",
    "SingularConversionError",
    "s_to_y",
    "y_to_s",
    "s_to_z",
    "z_to_s",
    "device_admittance",
    "one_port_admittance",
    "series_element_network",
    "group_delay",
]

SweepDirection = Literal["forward", "backward"]


class NetworkError(ValueError):
    """Invalid network data or an operation that cannot be applied to it."""


class SingularConversionError(NetworkError):
    """A parameter conversion hit a singular matrix."""

    def __init__(self, freq: float, what: str = "(I + S)"):
        self.freq = float(freq)
        super().__init__(f"{what} is singular at f = {self.freq:.9g} Hz")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Metadata:
    """Measurement context attached to a network.

    Attributes:
        bias_voltage: DC bias across the electrode pair (V).
        sweep_direction: ``"forward"`` or ``"backward"`` branch of a bias sweep.
        temperature: Stage temperature (K).
        delay_length: Physical delay length of a delay-line device (m).
        label: Free text; Touchstone comments end up here.
    """

    bias_voltage: float | None = None
    sweep_direction: SweepDirection | None = None
    temperature: float | None = None
    delay_length: float | None = None
    label: str = ""

    def __post_init__(self):
        if self.sweep_direction not in (None, "forward", "backward"):
            raise NetworkError(f"sweep_direction must be 'forward' or 'backward', got {self.sweep_direction!r}")
        for name in ("temperature", "delay_length"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise NetworkError(f"{name} must be >= 0, got {v}")

    def is_empty(self) -> bool:
        return self == Metadata()


@dataclass(frozen=True)
class Network:
    """Scattering parameters on an ascending frequency grid.

    Attributes:
        freqs: Frequencies (Hz), strictly increasing and positive.
        s: Complex S-matrices, shape ``(N, 2, 2)``.
        z0: Real reference impedance (ohm).
        meta: Measurement metadata.
        n_ports: 1 or 2. For one-port data only ``s[:, 0, 0]`` is meaningful.
    """

    freqs: np.ndarray
    s: np.ndarray
    z0: float = 50.0
    meta: Metadata = field(default_factory=Metadata)
    n_ports: int = 2

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float).reshape(-1)
        s = np.asarray(self.s, dtype=complex)
        if s.ndim == 1 and self.n_ports == 1:
            s1 = np.full((s.size, 2, 2), np.nan + 0j)
            s1[:, 0, 0] = s
            s = s1
        if f.size < 1:
            raise NetworkError("network needs at least one frequency point")
        if np.any(f <= 0) or not np.all(np.isfinite(f)):
            raise NetworkError("frequencies must be finite and > 0")
        if np.any(np.diff(f) <= 0):
            raise NetworkError("frequencies must be strictly increasing")
        if s.shape != (f.size, 2, 2):
            raise NetworkError(f"s must have shape ({f.size}, 2, 2), got {s.shape}")
        if not self.z0 > 0:
            raise NetworkError(f"z0 must be > 0, got {self.z0}")
        if self.n_ports not in (1, 2):
            raise NetworkError(f"n_ports must be 1 or 2, got {self.n_ports}")
        if self.n_ports == 1:
            s = s.copy()
            s[:, 0, 1] = s[:, 1, 0] = s[:, 1, 1] = np.nan
        object.__setattr__(self, "freqs", _frozen(f))
        object.__setattr__(self, "s", _frozen(s))
        object.__setattr__(self, "z0", float(self.z0))

    def __len__(self) -> int:
        return self.freqs.size

    @property
    def s11(self) -> np.ndarray:
        return self.s[:, 0, 0]

    @property
    def s21(self) -> np.ndarray:
        return self.s[:, 1, 0]

    @property
    def s12(self) -> np.ndarray:
        return self.s[:, 0, 1]

    @property
    def s22(self) -> np.ndarray:
        return self.s[:, 1, 1]

    def with_meta(self, **changes) -> Network:
        return replace(self, meta=replace(self.meta, **changes))

    def window(self, f_lo: float, f_hi: float) -> Network:
        """Return the sub-network with ``f_lo <= f <= f_hi``."""
        keep = (self.freqs >= f_lo) & (self.freqs <= f_hi)
        if not keep.any():
            raise NetworkError(f"no points in band [{f_lo:g}, {f_hi:g}] Hz")
        return replace(self, freqs=self.freqs[keep], s=self.s[keep])


@dataclass(frozen=True)
class AdmittanceSpectrum:
    """Complex device admittance ``y`` (S) on frequencies ``freqs`` (Hz)."""

    freqs: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float).reshape(-1)
        y = np.asarray(self.y, dtype=complex).reshape(-1)
        if f.size != y.size:
            raise NetworkError(f"freqs ({f.size}) and y ({y.size}) differ in length")
        if np.any(np.diff(f) <= 0):
            raise NetworkError("frequencies must be strictly increasing")
        object.__setattr__(self, "freqs", _frozen(f))
        object.__setattr__(self, "y", _frozen(y))

    def __len__(self) -> int:
        return self.freqs.size

    @property
    def omega(self) -> np.ndarray:
        return 2 * np.pi * self.freqs

    def window(self, f_lo: float, f_hi: float) -> AdmittanceSpectrum:
        keep = (self.freqs >= f_lo) & (self.freqs <= f_hi)
        if not keep.any():
            raise NetworkError(f"no points in band [{f_lo:g}, {f_hi:g}] Hz")
        return AdmittanceSpectrum(self.freqs[keep], self.y[keep])


def _require_two_port(net: Network):
    if net.n_ports != 2:
        raise NetworkError("operation requires a two-port network")


def _solve_each(a: np.ndarray, b: np.ndarray, freqs: np.ndarray, what: str) -> np.ndarray:
    """Solve ``a[k] @ x[k] = b[k]`` per frequency, naming the first singular point."""
    cond = np.linalg.cond(a)
    bad = ~np.isfinite(cond) | (cond > 1e14)
    if bad.any():
        raise SingularConversionError(freqs[np.argmax(bad)], what)
    return np.linalg.solve(a, b)


def s_to_y(net: Network) -> np.ndarray:
    """Admittance matrices ``Y = (1/z0) (I + S)^-1 (I - S)``, shape ``(N, 2, 2)``."""
    _require_two_port(net)
    eye = np.eye(2)
    return _solve_each(eye + net.s, eye - net.s, net.freqs, "(I + S)") / net.z0


def y_to_s(y: np.ndarray, z0: float = 50.0, freqs: np.ndarray | None = None) -> np.ndarray:
    """Inverse of :func:`s_to_y`: ``S = (I + z0 Y)^-1 (I - z0 Y)``."""
    y = np.asarray(y, dtype=complex)
    eye = np.eye(y.shape[-1])
    f = np.arange(y.shape[0], dtype=float) if freqs is None else np.asarray(freqs, dtype=float)
    return _solve_each(eye + z0 * y, eye - z0 * y, f, "(I + z0 Y)")


def s_to_z(net: Network) -> np.ndarray:
    """Impedance matrices ``Z = z0 (I - S)^-1 (I + S)``."""
    _require_two_port(net)
    eye = np.eye(2)
    return _solve_each(eye - net.s, eye + net.s, net.freqs, "(I - S)") * net.z0


def z_to_s(z: np.ndarray, z0: float = 50.0, freqs: np.ndarray | None = None) -> np.ndarray:
    """Inverse of :func:`s_to_z`: ``S = (Z + z0 I)^-1 (Z - z0 I)``."""
    z = np.asarray(z, dtype=complex)
    eye = np.eye(z.shape[-1])
    f = np.arange(z.shape[0], dtype=float) if freqs is None else np.asarray(freqs, dtype=float)
    return _solve_each(z + z0 * eye, z - z0 * eye, f, "(Z + z0 I)")


def device_admittance(net: Network) -> AdmittanceSpectrum:
    """Admittance of a device connected in series between port 1 and port 2.

    Uses ``-(Y12 + Y21) / 2``; for a reciprocal network this is just ``-Y21``.
    The average keeps a little of the measurement noise symmetric.
    """
    y = s_to_y(net)
    return AdmittanceSpectrum(net.freqs, -(y[:, 0, 1] + y[:, 1, 0]) / 2)


def one_port_admittance(net: Network) -> AdmittanceSpectrum:
    """Admittance seen at port 1, ``(1 - S11) / (z0 (1 + S11))``."""
    s11 = net.s11
    den = 1 + s11
    bad = np.abs(den) < 1e-14
    if bad.any():
        raise SingularConversionError(net.freqs[np.argmax(bad)], "(1 + S11)")
    return AdmittanceSpectrum(net.freqs, (1 - s11) / (net.z0 * den))


def series_element_network(spec: AdmittanceSpectrum, z0: float = 50.0,
                           meta: Metadata | None = None) -> Network:
    """Embed an admittance as a series element between the two ports."""
    y = np.asarray(spec.y)
    ymat = np.empty((y.size, 2, 2), dtype=complex)
    ymat[:, 0, 0] = ymat[:, 1, 1] = y
    ymat[:, 0, 1] = ymat[:, 1, 0] = -y
    s = y_to_s(ymat, z0, spec.freqs)
    return Network(spec.freqs, s, z0, meta or Metadata())


def group_delay(freqs: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Group delay ``-(1/2 pi) d(phase)/df`` of a complex response (s).

    The phase is unwrapped (threshold pi) before differentiation; interior
    points use central differences and the two edges one-sided differences.
    """
    freqs = np.asarray(freqs, dtype=float)
    values = np.asarray(values, dtype=complex)
    if freqs.size < 3:
        raise NetworkError("group delay needs at least 3 frequency points")
    if freqs.shape != values.shape:
        raise NetworkError("freqs and values must have the same shape")
    phase = np.unwrap(np.angle(values))
    return -np.gradient(phase, freqs, edge_order=1) / (2 * np.pi)
