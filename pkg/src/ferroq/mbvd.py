"""Modified Butterworth-Van Dyke (mBVD) equivalent circuit.

A static branch ``r0 + c0`` in parallel with a motional ``rm + lm + cm``
branch, the pair in series with an electrode resistance ``rs``.  This module
synthesizes the admittance, fits it to measured spectra and derives the usual
figures of merit.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ._lm import levenberg_marquardt
from .network import AdmittanceSpectrum, NetworkError, group_delay

__all__ = [
    "fom_from_frequencies",
    "MbvdParams",
    "MbvdFit",
    "FomReport",
    "ResonanceNotBracketed",
    "y_mbvd",
    "init_guess",
    "fit_mbvd",
    "compute_fom",
    "bode_q",
    "s11_from_admittance",
    "K2_DEFINITIONS",
]

PARAM_NAMES = ("r0", "c0", "rs", "rm", "lm", "cm")

# Name -> k^2 as a function of fs, fp.  All are increasing in cm/c0.
K2_DEFINITIONS = {
    "cm_ratio": "cm / (c0 + cm)",
    "freq_sep": "(fp^2 - fs^2) / fp^2",
    "pi2_8": "(pi^2 / 8) (fp^2 - fs^2) / fs^2",
    "ieee_176": "(pi/2)(fs/fp) / tan((pi/2)(fs/fp))",
}


class ResonanceNotBracketed(NetworkError):
    """The spectrum has no admittance minimum above its maximum."""


@dataclass(frozen=True)
class MbvdParams:
    r0: float
    c0: float
    rs: float
    rm: float
    lm: float
    cm: float

    def __post_init__(self):
        if not (self.c0 > 0 and self.cm > 0 and self.lm > 0):
            raise ValueError(f"c0, cm, lm must be > 0: {self}")
        if min(self.r0, self.rs, self.rm) < 0:
            raise ValueError(f"r0, rs, rm must be >= 0: {self}")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PARAM_NAMES], dtype=float)

    @classmethod
    def from_array(cls, a) -> MbvdParams:
        return cls(*(float(v) for v in a))

    @classmethod
    def from_resonance(cls, fs: float, fp: float, c0: float, q: float,
                       r0: float = 0.0, rs: float = 0.0) -> MbvdParams:
        """Build parameters from series/parallel frequencies, ``c0`` and motional Q."""
        cm = c0 * ((fp / fs) ** 2 - 1)
        lm = 1 / ((2 * np.pi * fs) ** 2 * cm)
        rm = 2 * np.pi * fs * lm / q
        return cls(r0, c0, rs, rm, lm, cm)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MbvdFit:
    """Result of :func:`fit_mbvd`.

    ``covariance`` is in linear parameter units, ordered as ``PARAM_NAMES``.
    ``freqs`` holds the frequency grid that was fitted.
    """

    params: MbvdParams
    residual_rms: float
    covariance: np.ndarray
    n_iter: int
    converged: bool
    freqs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cost_history: tuple = ()

    @property
    def stderr(self) -> dict:
        return {n: float(np.sqrt(max(v, 0.0))) for n, v in zip(PARAM_NAMES, np.diag(self.covariance))}

    def to_dict(self, include_freqs: bool = False) -> dict:
        d = {
            "params": self.params.to_dict(),
            "stderr": self.stderr,
            "residual_rms": self.residual_rms,
            "covariance": np.asarray(self.covariance).tolist(),
            "n_iter": self.n_iter,
            "converged": self.converged,
            "band": [float(self.freqs[0]), float(self.freqs[-1])] if len(self.freqs) else None,
            "n_points": int(len(self.freqs)),
        }
        if include_freqs:
            d["freqs"] = [float(f) for f in self.freqs]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> MbvdFit:
        """Inverse of :meth:`to_dict`; the grid is rebuilt from ``freqs`` or, if absent, ``band``."""
        if d.get("freqs") is not None:
            freqs = np.asarray(d["freqs"], dtype=float)
        elif d.get("band"):
            freqs = np.linspace(d["band"][0], d["band"][1], int(d["n_points"]))
        else:
            freqs = np.zeros(0)
        cov = d.get("covariance")
        cov = np.asarray(cov, dtype=float) if cov is not None else np.full((6, 6), np.nan)
        return cls(MbvdParams(**d["params"]), float(d["residual_rms"]), cov, int(d.get("n_iter", 0)),
                   bool(d.get("converged", True)), freqs)


@dataclass(frozen=True)
class FomReport:
    fs: float
    fp: float
    k2: dict
    q_bode_max: float | None
    q_motional: float | None
    c0: float

    def to_dict(self) -> dict:
        return asdict(self)


def _branches(p: np.ndarray, w: np.ndarray):
    r0, c0, rs, rm, lm, cm = p
    y0 = 1 / (r0 + 1 / (1j * w * c0))
    ym = 1 / (rm + 1j * w * lm + 1 / (1j * w * cm))
    return y0, ym


def _y(p: np.ndarray, w: np.ndarray) -> np.ndarray:
    y0, ym = _branches(p, w)
    yb = y0 + ym
    rs = p[2]
    return yb if rs == 0 else yb / (1 + rs * yb)


def y_mbvd(p: MbvdParams, freqs) -> AdmittanceSpectrum:
    """Admittance of the mBVD circuit on ``freqs`` (Hz)."""
    freqs = np.asarray(freqs, dtype=float)
    return AdmittanceSpectrum(freqs, _y(p.as_array(), 2 * np.pi * freqs))


def _dy_dp(p: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Partial derivatives of Y with respect to each parameter, shape (6, N)."""
    r0, c0, rs, rm, lm, cm = p
    y0, ym = _branches(p, w)
    yb = y0 + ym
    outer = 1 / (1 + rs * yb) ** 2
    y = yb / (1 + rs * yb)
    return np.array([
        -y0**2 * outer,
        y0**2 / (1j * w * c0**2) * outer,
        -y**2,
        -ym**2 * outer,
        -ym**2 * 1j * w * outer,
        ym**2 / (1j * w * cm**2) * outer,
    ])


def _refine_extremum(x: np.ndarray, y: np.ndarray, k: int) -> float:
    """Vertex of the parabola through the 3 points around index ``k``."""
    if k <= 0 or k >= len(x) - 1:
        return float(x[k])
    x0, x1, x2 = x[k - 1:k + 2]
    y0, y1, y2 = y[k - 1:k + 2]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denom
    if a == 0:
        return float(x1)
    xv = -b / (2 * a)
    return float(np.clip(xv, x0, x2))


def _locate_resonance(spec: AdmittanceSpectrum) -> tuple[int, int]:
    mag = np.abs(spec.y)
    i_max = int(np.argmax(mag))
    above = mag[i_max + 1:]
    if above.size < 2:
        raise ResonanceNotBracketed("no admittance minimum above the maximum")
    i_min = i_max + 1 + int(np.argmin(above))
    if i_min >= len(mag) - 1 or i_max == 0:
        raise ResonanceNotBracketed("resonance not bracketed: |Y| extremum at the band edge")
    return i_max, i_min


def init_guess(spec: AdmittanceSpectrum) -> MbvdParams:
    """Heuristic starting point from the shape of ``|Y|``."""
    f, y = spec.freqs, spec.y
    w = 2 * np.pi * f
    i_max, i_min = _locate_resonance(spec)
    ldb = 20 * np.log10(np.abs(y))
    fs = _refine_extremum(f, ldb, i_max)
    fp = _refine_extremum(f, ldb, i_min)
    if not fp > fs:
        raise ResonanceNotBracketed("parallel resonance not above series resonance")
    span = fp - fs
    off = (f < fs - span) | (f > fp + span)
    if off.sum() < 3:
        off = np.ones_like(f, dtype=bool)
        off[max(i_max - 1, 0):i_min + 2] = False
    # divide out the motional branch's off-resonance capacitance, cm = c0 ((fp/fs)^2 - 1)
    motional = ((fp / fs) ** 2 - 1) / (1 - (f[off] / fs) ** 2)
    c0 = float(np.median(y.imag[off] / w[off] / (1 + motional)))
    if not c0 > 0:
        c0 = float(np.median(np.abs(y) / w))
    cm = c0 * ((fp / fs) ** 2 - 1)
    lm = 1 / ((2 * np.pi * fs) ** 2 * cm)
    ymax = float(np.abs(y[i_max]))
    rs = 0.02 / ymax
    rm = max(1 / ymax - rs, 0.1 / ymax)
    r0 = 1e-3 / (2 * np.pi * fs * c0)
    return MbvdParams(r0, c0, rs, rm, lm, cm)


def fit_mbvd(spec: AdmittanceSpectrum, init: MbvdParams | None = None,
             max_iter: int = 500, xtol: float = 1e-10, ftol: float = 1e-12) -> MbvdFit:
    """Least-squares fit of the mBVD circuit to a single-resonance spectrum.

    Minimizes ``sum |Y_model - Y_meas|^2 / |Y_meas|^2`` over the logarithms
    of the six elements, which keeps every element positive.

    Raises:
        ResonanceNotBracketed: when no initial guess is given and the
            spectrum does not contain a series/parallel pair.
        ValueError: fewer than 50 frequency points.
    """
    if len(spec) < 50:
        raise ValueError(f"fit_mbvd needs at least 50 frequency points, got {len(spec)}")
    if init is None:
        init = init_guess(spec)
    w = spec.omega
    ymeas = np.asarray(spec.y)
    scale = 1 / np.abs(ymeas)
    p0 = np.maximum(init.as_array(), 1e-30)

    # Stage 1: resistances linear (scaled), reactances logarithmic. A pure
    # log fit tends to park r0 or rs at ~0 in a local minimum.
    lin = np.array([True, False, True, True, False, False])
    rscale = np.where(lin, p0[3], 1.0)

    def unpack1(theta):
        return np.where(lin, theta * rscale, np.exp(np.where(lin, 0.0, theta)))

    def resid_at(p):
        d = (_y(p, w) - ymeas) * scale
        return np.concatenate([d.real, d.imag])

    def jac_at(p, dp_dtheta):
        dj = _dy_dp(p, w) * dp_dtheta[:, None] * scale[None, :]
        return np.concatenate([dj.real, dj.imag], axis=1).T

    def resid1(theta):
        return resid_at(unpack1(theta))

    def jac1(theta):
        p = unpack1(theta)
        return jac_at(p, np.where(lin, rscale, p))

    theta1 = np.where(lin, p0 / rscale, np.log(p0))
    res1 = levenberg_marquardt(resid1, jac1, theta1, xtol=xtol, ftol=ftol, max_iter=max_iter,
                               max_step=np.where(lin, np.inf, 1.0))
    p1 = unpack1(res1.x)
    p1 = np.where(lin, np.maximum(p1, 1e-9 * p0[3]), p1)

    # Stage 2: everything logarithmic, positivity by construction.
    def resid2(theta):
        return resid_at(np.exp(theta))

    def jac2(theta):
        p = np.exp(theta)
        return jac_at(p, p)

    res = levenberg_marquardt(resid2, jac2, np.log(p1), xtol=xtol, ftol=ftol,
                              max_iter=max(max_iter - res1.n_iter, 1), max_step=1.0)
    res.n_iter += res1.n_iter
    p = np.exp(res.x)
    n = len(spec)
    rms = float(np.sqrt(2 * res.cost / n))
    dof = max(2 * n - 6, 1)
    s2 = 2 * res.cost / dof
    try:
        cov_log = np.linalg.pinv(res.jac.T @ res.jac) * s2
    except np.linalg.LinAlgError:
        cov_log = np.full((6, 6), np.nan)
    cov = cov_log * np.outer(p, p)
    return MbvdFit(MbvdParams.from_array(p), rms, cov, res.n_iter, res.converged,
                   np.asarray(spec.freqs).copy(), tuple(res.cost_history))


def s11_from_admittance(y: np.ndarray, z0: float = 50.0) -> np.ndarray:
    """Reflection of a one-port with admittance ``y`` terminating a ``z0`` line."""
    y = np.asarray(y, dtype=complex)
    return (1 - z0 * y) / (1 + z0 * y)


def bode_q(freqs, s11, guard: float = 1e-12) -> np.ndarray:
    """Bode Q, ``w * tau_g * |S11| / (1 - |S11|^2)``, per frequency.

    ``tau_g`` is the group delay of S11.  Points where ``1 - |S11|^2 <= guard``
    (a lossless or active reflection) are NaN.
    """
    freqs = np.asarray(freqs, dtype=float)
    s11 = np.asarray(s11, dtype=complex)
    if freqs.size < 3:
        raise NetworkError("bode_q needs at least 3 frequency points")
    tau = group_delay(freqs, s11)
    mag = np.abs(s11)
    denom = 1 - mag**2
    q = np.full(freqs.shape, np.nan)
    ok = denom > guard
    q[ok] = 2 * np.pi * freqs[ok] * tau[ok] * mag[ok] / denom[ok]
    return q


def _k2_map(fs: float, fp: float, p: MbvdParams) -> dict:
    r = fs / fp
    return {
        "cm_ratio": p.cm / (p.c0 + p.cm),
        "freq_sep": (fp**2 - fs**2) / fp**2,
        "pi2_8": (np.pi**2 / 8) * (fp**2 - fs**2) / fs**2,
        "ieee_176": (np.pi / 2) * r / np.tan(np.pi / 2 * r),
    }


def compute_fom(p: MbvdParams, z0: float = 50.0, n_bode: int = 4001) -> FomReport:
    """Series/parallel resonance, coupling under several definitions and Q.

    ``q_bode_max`` is the local peak of the Bode Q, seen as a one-port on a
    ``z0`` line, closest to ``fs`` within ``fs +/- (fp - fs)/2``.  The Bode Q
    of an mBVD also climbs away from resonance, so a global maximum over a
    wide band would report an off-resonance value.
    ``q_motional`` is ``None`` when ``rm == 0``.
    """
    fs = 1 / (2 * np.pi * np.sqrt(p.lm * p.cm))
    fp = fs * np.sqrt(1 + p.cm / p.c0)
    q_m = 2 * np.pi * fs * p.lm / p.rm if p.rm > 0 else None
    span = fp - fs
    f = np.linspace(fs - 0.5 * span, fs + 0.5 * span, n_bode)
    with np.errstate(divide="ignore", invalid="ignore"):  # rm = 0 puts a pole on the grid
        q = bode_q(f, s11_from_admittance(y_mbvd(p, f).y, z0))
    q_bode = None
    if np.any(np.isfinite(q)):
        qi = np.where(np.isfinite(q), q, -np.inf)
        peaks = np.flatnonzero((qi[1:-1] >= qi[:-2]) & (qi[1:-1] > qi[2:]) & np.isfinite(q[1:-1])) + 1
        k = peaks[np.argmin(np.abs(f[peaks] - fs))] if peaks.size else int(np.argmax(qi))
        q_bode = float(q[k])
    return FomReport(float(fs), float(fp), _k2_map(fs, fp, p), q_bode, q_m, p.c0)


def fom_from_frequencies(fs: float, fp: float) -> dict:
    """k^2 under the frequency-only definitions, for resonances read off a plot."""
    r = fs / fp
    return {
        "freq_sep": (fp**2 - fs**2) / fp**2,
        "pi2_8": (np.pi**2 / 8) * (fp**2 - fs**2) / fs**2,
        "ieee_176": (np.pi / 2) * r / np.tan(np.pi / 2 * r),
    }
