"""Touchstone v1 reader and writer (.s1p / .s2p).

Only scattering parameters are supported.  Comment lines of the form
``! key: value`` whose key is a :class:`~ferroq.network.Metadata` field are
read back into the metadata; every other comment is appended to the label.
"""
from __future__ import annotations

import io
import math
from typing import IO

import numpy as np

from . import __version__
from .network import Metadata, Network, NetworkError

__all__ = ["TouchstoneError", "parse_touchstone", "read_touchstone", "write_touchstone", "save_touchstone"]

FREQ_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
FORMATS = ("ri", "ma", "db")
BANNER = f"! Generated by ferroq {__version__}"
_META_KEYS = ("bias_voltage", "sweep_direction", "temperature", "delay_length")


class TouchstoneError(NetworkError):
    """Malformed Touchstone input; ``line`` is 1-based (0 when not tied to a line)."""

    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


def _parse_option_line(tokens: list[str], lineno: int) -> tuple[float, str, float]:
    unit, fmt, z0 = 1e9, "ma", 50.0
    i = 0
    while i < len(tokens):
        tok = tokens[i].lower()
        if tok in FREQ_UNITS:
            unit = FREQ_UNITS[tok]
        elif tok in FORMATS:
            fmt = tok
        elif tok == "s":
            pass
        elif tok in ("y", "z", "h", "g"):
            raise TouchstoneError(f"parameter type {tokens[i]!r} not supported (S only)", lineno)
        elif tok == "r":
            if i + 1 >= len(tokens):
                raise TouchstoneError("option 'R' is missing its reference impedance", lineno)
            try:
                z0 = float(tokens[i + 1])
            except ValueError:
                raise TouchstoneError(f"bad reference impedance {tokens[i + 1]!r}", lineno) from None
            if not z0 > 0:
                raise TouchstoneError(f"reference impedance must be > 0, got {z0}", lineno)
            i += 1
        else:
            raise TouchstoneError(f"unknown option {tokens[i]!r}", lineno)
        i += 1
    return unit, fmt, z0


def _to_complex(a: np.ndarray, b: np.ndarray, fmt: str) -> np.ndarray:
    if fmt == "ri":
        return a + 1j * b
    mag = a if fmt == "ma" else 10 ** (a / 20)
    return mag * np.exp(1j * np.deg2rad(b))


def _apply_comment(text: str, meta: dict, label: list[str], lineno: int):
    key, sep, value = text.partition(":")
    key = key.strip()
    if sep and key in _META_KEYS:
        value = value.strip()
        if key == "sweep_direction":
            if value not in ("forward", "backward"):
                raise TouchstoneError(f"bad sweep_direction {value!r}", lineno)
            meta[key] = value
            return
        try:
            meta[key] = float(value)
        except ValueError:
            raise TouchstoneError(f"bad {key} value {value!r}", lineno) from None
    elif sep and key == "label":
        label.append(value.strip())
    elif text.strip() and not text.strip().startswith("Generated by ferroq"):
        label.append(text.strip())


def parse_touchstone(text: str | IO[str], n_ports: int | None = None) -> Network:
    """Parse Touchstone v1 text into a :class:`Network`.

    Args:
        text: File contents or an open text stream.
        n_ports: Force 1 or 2 ports; inferred from the first data row otherwise.

    Raises:
        TouchstoneError: with the offending line number.
    """
    if not isinstance(text, str):
        text = text.read()
    option = None
    meta: dict = {}
    label: list[str] = []
    rows: list[list[float]] = []
    row_lines: list[int] = []
    ncols = None if n_ports is None else 1 + 2 * n_ports**2
    lineno = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body, bang, comment = raw.partition("!")
        if bang:
            _apply_comment(comment, meta, label, lineno)
        body = body.strip()
        if not body:
            continue
        if body.startswith("["):
            raise TouchstoneError(f"Touchstone v2 keyword {body.split()[0]!r} not supported (v1 only)", lineno)
        if body.startswith("#"):
            if option is not None:
                raise TouchstoneError("duplicate option line", lineno)
            option = _parse_option_line(body[1:].split(), lineno)
            continue
        if option is None:
            raise TouchstoneError("data before the '#' option line", lineno)
        try:
            values = [float(tok) for tok in body.split()]
        except ValueError as exc:
            raise TouchstoneError(f"non-numeric value ({exc})", lineno) from None
        if ncols is None:
            if len(values) not in (3, 9):
                raise TouchstoneError(f"expected 3 (1-port) or 9 (2-port) columns, got {len(values)}", lineno)
            ncols = len(values)
        elif len(values) != ncols:
            raise TouchstoneError(f"expected {ncols} columns, got {len(values)}", lineno)
        if not all(math.isfinite(v) for v in values):
            raise TouchstoneError("non-finite value", lineno)
        if rows and values[0] <= rows[-1][0]:
            raise TouchstoneError(f"frequency {values[0]:g} not above previous {rows[-1][0]:g}", lineno)
        if values[0] <= 0:
            raise TouchstoneError(f"frequency must be > 0, got {values[0]:g}", lineno)
        rows.append(values)
        row_lines.append(lineno)

    if option is None:
        raise TouchstoneError("missing '#' option line", lineno)
    if not rows:
        raise TouchstoneError("no data rows", lineno)
    unit, fmt, z0 = option
    data = np.array(rows)
    freqs = data[:, 0] * unit
    if np.any(np.diff(freqs) <= 0):
        k = int(np.argmax(np.diff(freqs) <= 0)) + 1
        raise TouchstoneError("frequency not strictly increasing after unit scaling", row_lines[k])
    vals = _to_complex(data[:, 1::2], data[:, 2::2], fmt)
    ports = 1 if ncols == 3 else 2
    s = np.full((freqs.size, 2, 2), np.nan + 0j)
    if ports == 1:
        s[:, 0, 0] = vals[:, 0]
    else:
        # v1 two-port column order is S11 S21 S12 S22
        s[:, 0, 0], s[:, 1, 0], s[:, 0, 1], s[:, 1, 1] = vals.T
    try:
        md = Metadata(label="\n".join(label), **meta)
    except (NetworkError, TypeError) as exc:
        raise TouchstoneError(f"bad metadata comment: {exc}", 0) from None
    return Network(freqs, s, z0, md, n_ports=ports)


def read_touchstone(path, n_ports: int | None = None) -> Network:
    """Read a ``.s1p``/``.s2p`` file; the extension fixes the port count when present."""
    path = str(path)
    if n_ports is None:
        ext = path.lower().rsplit(".", 1)[-1]
        n_ports = {"s1p": 1, "s2p": 2}.get(ext)
    with open(path, encoding="utf-8") as fh:
        return parse_touchstone(fh, n_ports=n_ports)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_touchstone(net: Network) -> str:
    """Serialize as Touchstone v1: Hz, RI, full double precision."""
    out = io.StringIO()
    out.write(BANNER + "\n")
    m = net.meta
    for key in _META_KEYS:
        v = getattr(m, key)
        if v is not None:
            out.write(f"! {key}: {v if key == 'sweep_direction' else _fmt(v)}\n")
    for line in m.label.splitlines():
        out.write(f"! label: {line}\n")
    out.write(f"# Hz S RI R {_fmt(net.z0)}\n")
    if net.n_ports == 1:
        cols = [net.s11]
    else:
        cols = [net.s11, net.s21, net.s12, net.s22]
    for k, f in enumerate(net.freqs):
        parts = [_fmt(f)]
        for c in cols:
            parts += [_fmt(c[k].real), _fmt(c[k].imag)]
        out.write(" ".join(parts) + "\n")
    return out.getvalue()


def save_touchstone(net: Network, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(write_touchstone(net))
