"""Bias-dependent material extraction by inverting the 1D forward model.

Measured quantities per bias point are the mBVD ``c0`` and the circuit
``fs``/``fp``.  The forward model is run through exactly the same chain
(simulate on the measured grid -> fit mBVD -> figures of merit), so any
systematic difference between the FEM spectrum and an ideal mBVD cancels.

Each bias point is solved by three scalar inversions in sequence,
permittivity from ``c0``, stiffness from ``fs``, piezoelectric coefficient
from ``fp``, repeated for a fixed number of outer passes.  The V = 0 point
uses a uniform cell and becomes the baseline for the unmodulated material of
every other point; only the electrode gaps change with bias.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .lamb1d import Geometry, MaterialParams, build_model, build_regions, harmonic_admittance, static_capacitance
from .mbvd import MbvdFit, compute_fom, fit_mbvd
from .network import NetworkError

__all__ = [
    "ExtractionError",
    "CapCalibration",
    "ForwardModel",
    "Observables",
    "ExtractionPoint",
    "calibrate_c_eps",
    "invert_permittivity",
    "refine_permittivity",
    "fit_stiffness",
    "fit_piezo",
    "extract_point",
    "extract_sweep",
]


class ExtractionError(ValueError):
    """An inversion target could not be bracketed or the model failed."""


@dataclass(frozen=True)
class CapCalibration:
    """Linear map ``C = slope * eps3 + intercept`` over ``eps_range``."""

    slope: float
    intercept: float
    max_deviation: float
    eps_range: tuple[float, float]

    def capacitance(self, eps3: float) -> float:
        return self.slope * eps3 + self.intercept

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept,
                "max_deviation": self.max_deviation, "eps_range": list(self.eps_range)}


def calibrate_c_eps(g: Geometry, eps_grid: Sequence[float], template: MaterialParams | None = None,
                    baseline: MaterialParams | None = None, elements_per_wavelength: int = 40,
                    max_deviation: float = 0.02) -> CapCalibration:
    """Least-squares line through the simulated static capacitance versus eps3.

    ``template`` supplies c_eff, e_eff, rho (default: unpoled, so the line is
    the pure dielectric response).  With ``baseline`` only the electrode gaps
    take the grid permittivity; otherwise the whole cell does.

    Raises:
        ExtractionError: fewer than 3 distinct values, eps < 1, or a
            deviation above ``max_deviation`` (nonlinear response).
    """
    eps = np.unique(np.asarray(eps_grid, dtype=float))
    if eps.size < 3 or np.any(eps < 1):
        raise ExtractionError("eps_grid needs >= 3 distinct values >= 1")
    tpl = template or MaterialParams(eps3=1.0, c_eff=1e11, e_eff=0.0)
    caps = []
    for e in eps:
        mat = tpl.with_(eps3=float(e))
        regions = build_regions(g, mat, baseline)
        caps.append(static_capacitance(build_model(g, regions, elements_per_wavelength)))
    caps = np.array(caps)
    a, b = np.polyfit(eps, caps, 1)
    dev = float(np.max(np.abs(a * eps + b - caps) / np.abs(caps)))
    if dev > max_deviation:
        raise ExtractionError(f"capacitance is not linear in eps3 (max deviation {dev:.3%})")
    return CapCalibration(float(a), float(b), dev, (float(eps[0]), float(eps[-1])))


def invert_permittivity(c0_measured: float, cal: CapCalibration, max_extrapolation: float = 0.1) -> float:
    """``(c0 - b) / a``, refusing values more than 10% of the grid span outside it."""
    eps = (c0_measured - cal.intercept) / cal.slope
    lo, hi = cal.eps_range
    margin = max_extrapolation * (hi - lo)
    if not (lo - margin <= eps <= hi + margin):
        raise ExtractionError(f"c0 = {c0_measured:.4g} F maps to eps3 = {eps:.4g}, outside "
                              f"calibrated range [{lo:g}, {hi:g}]")
    return float(eps)


@dataclass(frozen=True)
class Observables:
    c0: float
    fs: float
    fp: float
    fitted: bool = True  # False when taken from the modal fallback


@dataclass(frozen=True)
class ForwardModel:
    """Maps material parameters to the observables a measurement would give.

    Attributes:
        geometry: device geometry.
        freqs: measurement frequency grid used for the mBVD fit of the
            simulated spectrum.
        baseline: unmodulated material; ``None`` simulates a uniform cell.
        elements_per_wavelength: mesh density.
    """

    geometry: Geometry
    freqs: np.ndarray
    baseline: MaterialParams | None = None
    elements_per_wavelength: int = 40

    def model(self, mat: MaterialParams):
        return build_model(self.geometry, build_regions(self.geometry, mat, self.baseline),
                           self.elements_per_wavelength)

    def observe(self, mat: MaterialParams) -> Observables:
        """Simulate and fit; outside the grid fall back to modal estimates.

        The fallback keeps root-finding brackets monotone when a trial value
        pushes the resonance out of the measured window.
        """
        m = self.model(mat)
        f1 = m.mode_freqs[0]
        f = np.asarray(self.freqs)
        if f[0] < f1 < f[-1]:
            try:
                fit = fit_mbvd(harmonic_admittance(m, f))
                fom = compute_fom(fit.params)
                if f[0] < fom.fs < fom.fp < f[-1]:
                    return Observables(fit.params.c0, fom.fs, fom.fp, True)
            except (NetworkError, ArithmeticError, np.linalg.LinAlgError):
                pass
        g = self.geometry
        scale = g.area * g.n_cells
        cm = scale * m.gamma.real**2 / m.lam.real
        c0 = scale * m.C_s.real + float(np.sum(cm[1:]))
        return Observables(c0, float(f1), float(f1 * math.sqrt(1 + cm[0] / c0)), False)


def _root(fun: Callable[[float], float], x0: float, lo: float, hi: float, rtol: float) -> float:
    """Root of a monotone ``fun`` near ``x0``, expanding a bracket inside ``[lo, hi]``."""
    a, b = max(lo, x0 / 1.05), min(hi, x0 * 1.05)
    fa, fb = fun(a), fun(b)
    step = 1.05
    while fa * fb > 0:
        if a <= lo and b >= hi:
            raise ExtractionError(f"target not bracketed in [{lo:.4g}, {hi:.4g}]")
        step = step**2
        # move toward the side where the root must lie
        if abs(fa) < abs(fb):
            b, fb = a, fa
            a = max(lo, a / step)
            fa = fun(a)
        else:
            a, fa = b, fb
            b = min(hi, b * step)
            fb = fun(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    return float(brentq(fun, a, b, rtol=rtol, xtol=1e-300))


def refine_permittivity(c0_target: float, fwd: ForwardModel, mat: MaterialParams, rtol: float = 1e-8) -> float:
    """Root of fitted ``c0(eps3) - c0_target`` with c_eff, e_eff fixed."""
    return _root(lambda x: fwd.observe(mat.with_(eps3=x)).c0 / c0_target - 1, mat.eps3, 1.0, 1e5, rtol)


def fit_stiffness(fs_target: float, fwd: ForwardModel, mat: MaterialParams, c_ref: float | None = None,
                  rtol: float = 1e-8) -> float:
    """c_eff such that the simulated fitted ``fs`` equals ``fs_target``.

    The search is limited to ``[0.25, 4] * c_ref`` (``c_ref`` defaults to
    ``mat.c_eff``).
    """
    c_ref = c_ref or mat.c_eff
    return _root(lambda x: fwd.observe(mat.with_(c_eff=x)).fs / fs_target - 1,
                 mat.c_eff, 0.25 * c_ref, 4 * c_ref, rtol)


def fit_piezo(fp_target: float, fwd: ForwardModel, mat: MaterialParams, rtol: float = 1e-8) -> float:
    """e_eff >= 0 such that the simulated fitted ``fp`` equals ``fp_target``.

    Raises:
        ExtractionError: target not above the zero-coupling resonance, or
            not reachable.
    """
    f1 = fwd.model(mat.with_(e_eff=0.0)).mode_freqs[0]
    if not fp_target > f1:
        raise ExtractionError(f"fp target {fp_target:.6g} Hz is not above the uncoupled resonance {f1:.6g} Hz")
    x0 = abs(mat.e_eff) if mat.e_eff else 1.0
    e_max = 10 * math.sqrt(mat.c_eff * 8.854e-12 * mat.eps3) + 10 * x0
    return _root(lambda x: fwd.observe(mat.with_(e_eff=x)).fp / fp_target - 1, x0, 1e-3 * x0, e_max, rtol)


@dataclass(frozen=True)
class ExtractionPoint:
    voltage: float
    material: MaterialParams | None
    passes: list[MaterialParams] = field(default_factory=list)
    residual: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def last_pass_change(self) -> float:
        """Max relative change of (eps3, c_eff, e_eff) over the final pass."""
        return self.pass_change(len(self.passes) - 1)

    def pass_change(self, k: int) -> float:
        """Max relative change of (eps3, c_eff, e_eff) made by pass ``k`` (0-based, k >= 1)."""
        if not 1 <= k < len(self.passes):
            return float("nan")
        a, b = self.passes[k - 1], self.passes[k]
        return max(abs(getattr(b, n) / getattr(a, n) - 1) for n in ("eps3", "c_eff", "e_eff"))

    def to_dict(self) -> dict:
        d = {"voltage": self.voltage, "ok": self.ok, "error": self.error}
        if self.material is not None:
            d.update(self.material.to_dict())
            d["n_passes"] = len(self.passes)
            d["pass_changes"] = [self.pass_change(k) for k in range(1, len(self.passes))]
            d["residual"] = self.residual
        return d


def _targets(fit: MbvdFit) -> Observables:
    fom = compute_fom(fit.params)
    return Observables(fit.params.c0, fom.fs, fom.fp)


def extract_point(fit: MbvdFit, g: Geometry, start: MaterialParams, baseline: MaterialParams | None,
                  cal: CapCalibration | None = None, n_passes: int = 2,
                  elements_per_wavelength: int = 40, voltage: float = 0.0,
                  tol: float = 1e-6, max_passes: int = 30) -> ExtractionPoint:
    """Sequential eps3 -> c_eff -> e_eff inversion of one bias point.

    At least ``n_passes`` outer passes run; more follow until no parameter
    moves by more than ``tol`` (relative) in a pass.  eps3 and e_eff interact
    through the fitted ``c0``, so convergence usually takes a few passes.
    """
    if fit.freqs is None or len(fit.freqs) < 2:
        raise ExtractionError("fit carries no frequency grid")
    tgt = _targets(fit)
    fwd = ForwardModel(g, np.asarray(fit.freqs), baseline, elements_per_wavelength)
    mat = start
    if cal is not None:
        mat = mat.with_(eps3=invert_permittivity(tgt.c0, cal))
    passes = []
    point = None
    for k in range(max(n_passes, max_passes)):
        mat = mat.with_(eps3=refine_permittivity(tgt.c0, fwd, mat))
        mat = mat.with_(c_eff=fit_stiffness(tgt.fs, fwd, mat))
        mat = mat.with_(e_eff=fit_piezo(tgt.fp, fwd, mat))
        passes.append(mat)
        point = ExtractionPoint(float(voltage), mat, passes)
        if k + 1 >= n_passes and point.last_pass_change() < tol:
            break
    else:
        raise ExtractionError(f"outer passes did not settle (last change {point.last_pass_change():.2e})")
    obs = fwd.observe(mat)
    res = {"c0": obs.c0 / tgt.c0 - 1, "fs": obs.fs / tgt.fs - 1, "fp": obs.fp / tgt.fp - 1}
    return ExtractionPoint(float(voltage), mat, passes, res)


def extract_sweep(sweep: Sequence[tuple[float, MbvdFit]], g: Geometry, template: MaterialParams | None = None,
                  n_passes: int = 2, eps_grid: Sequence[float] = (200, 500, 1000, 2000, 4000),
                  elements_per_wavelength: int = 40, jobs: int = 1) -> list[ExtractionPoint]:
    """Material trajectory from a bias sweep of mBVD fits.

    The V = 0 record is extracted first with a uniform cell; its material is
    the baseline (and starting point) for the remaining points, which only
    vary the electrode-gap material.  Failures are recorded per point.

    Args:
        sweep: ``(voltage, fit)`` pairs; must contain V = 0.
        g: device geometry.
        template: supplies rho, q_mech, tan_delta and the starting c_eff, e_eff.
        n_passes: outer refinement passes.
        jobs: worker threads for the non-baseline points.

    Raises:
        ExtractionError: no V = 0 record or the baseline fails.
    """
    sweep = list(sweep)
    zero = [k for k, (v, _) in enumerate(sweep) if v == 0]
    if not zero:
        raise ExtractionError("sweep has no V = 0 record (baseline)")
    tpl = template or MaterialParams(eps3=1000.0, c_eff=1e11, e_eff=5.0)
    cal = calibrate_c_eps(g, eps_grid, tpl.with_(e_eff=0.0), None, elements_per_wavelength)
    k0 = zero[0]
    p0 = extract_point(sweep[k0][1], g, tpl, None, cal, n_passes, elements_per_wavelength)
    base = p0.material
    results: dict[int, ExtractionPoint] = {k0: p0}
    cal_gap = calibrate_c_eps(g, eps_grid, tpl.with_(e_eff=0.0), base.with_(e_eff=0.0),
                              elements_per_wavelength)

    def one(k):
        v, fit = sweep[k]
        try:
            return k, extract_point(fit, g, base, base, cal_gap, n_passes, elements_per_wavelength, v)
        except (ExtractionError, NetworkError, ArithmeticError) as exc:
            return k, ExtractionPoint(float(v), None, error=str(exc))

    todo = [k for k in range(len(sweep)) if k != k0]
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(jobs) as ex:
            done = list(ex.map(one, todo))
    else:
        done = [one(k) for k in todo]
    results.update(done)
    return [results[k] for k in range(len(sweep))]

