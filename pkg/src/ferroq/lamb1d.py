"""1D coupled piezoelectric finite-element model of a laterally excited bar.

The bar (one cell of width ``cell_width``) is meshed along the lateral
coordinate ``x`` with linear elements carrying displacement ``u`` and
potential ``phi``.  Constitutive relations::

    T = c S - e E,    D = e S + eps E,    S = du/dx,  E = -dphi/dx

with free mechanical ends, electrodes as equipotential node sets, complex
stiffness ``c (1 + j/q_mech)`` and permittivity ``eps (1 - j tan_delta)``.
Thickness only scales the charge (admittance ~ aperture * thickness).

The free potentials are condensed out once, leaving a mechanical pencil
``(K* - w^2 M) u = F V`` whose modes give the admittance in closed form::

    Y(w) = j w A n_cells [C_s + sum_n G_n^2 / (lam_n - w^2)]

Fidelity limits: no 2D/3D elasticity, no electrode mass loading, sharp
boundaries between poled and unpoled material.  Absolute frequencies and
capacitances differ from full-wave simulation of the real device.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal, NamedTuple, Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from .network import AdmittanceSpectrum

__all__ = [
    "EPS0",
    "BTO_DENSITY",
    "Geometry",
    "MaterialParams",
    "Region",
    "RegionMap",
    "DiscreteModel",
    "Resonance",
    "ModelError",
    "SingularSystemError",
    "NoResonanceError",
    "build_regions",
    "build_model",
    "harmonic_admittance",
    "static_capacitance",
    "modal_branches",
    "modal_admittance",
    "find_resonances",
    "bar_frequency",
]

EPS0 = 8.8541878128e-12
BTO_DENSITY = 6.02e3  # kg/m^3, handbook value; a default, not a fitted quantity

Layout = Literal["single_pair", "split_electrode"]


class ModelError(ValueError):
    """Inconsistent geometry, materials or region map."""


class SingularSystemError(ArithmeticError):
    def __init__(self, freq: float):
        self.freq = freq
        super().__init__(f"harmonic system singular at f = {freq:.9g} Hz (lossless resonance)")


class NoResonanceError(ValueError):
    """No admittance maximum in the requested band."""


@dataclass(frozen=True)
class Geometry:
    """Cell and electrode dimensions (m).

    ``single_pair`` places one driven/grounded electrode pair centered in the
    cell.  ``split_electrode`` places two mirrored pairs (S|gap|G ... G|gap|S)
    whose gap centers are ``split_pitch`` apart; both gaps are poled along
    their own field, so they stress the bar with the same sign and drive
    the third lateral harmonic plus the fundamental.
    """

    cell_width: float = 3e-6
    electrode_width: float = 0.75e-6
    electrode_gap: float = 1.35e-6
    film_thickness: float = 120e-9
    aperture: float = 60e-6
    n_cells: int = 15
    layout: Layout = "single_pair"
    split_pitch: float | None = None

    def __post_init__(self):
        for name in ("cell_width", "electrode_width", "electrode_gap", "film_thickness", "aperture"):
            if not getattr(self, name) > 0:
                raise ModelError(f"{name} must be > 0")
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise ModelError("n_cells must be a positive integer")
        if self.layout not in ("single_pair", "split_electrode"):
            raise ModelError(f"unknown layout {self.layout!r}")
        w, g = self.electrode_width, self.electrode_gap
        if self.layout == "single_pair":
            if 2 * w + g > self.cell_width * (1 + 1e-12):
                raise ModelError("electrode pair does not fit in the cell")
        else:
            p = self.split_pitch
            if p is None or not p > 0:
                raise ModelError("split_electrode layout needs split_pitch > 0")
            if p + g + 2 * w > self.cell_width * (1 + 1e-12):
                raise ModelError("split electrodes extend past the cell")
            if p < g + 2 * w - 1e-15:
                raise ModelError("split electrode pairs overlap")

    @classmethod
    def bar_device(cls) -> Geometry:
        """15-cell bar: 3 um cells, 0.75 um electrodes, 1.35 um gap, 120 nm film, 60 um aperture."""
        return cls()

    @classmethod
    def split_device(cls) -> Geometry:
        """Split-electrode cell tuned so the poled gaps sit on the 3rd-harmonic stress lobes."""
        return cls(cell_width=5e-6, electrode_width=0.4e-6, electrode_gap=0.8e-6,
                   film_thickness=120e-9, aperture=60e-6, n_cells=3,
                   layout="split_electrode", split_pitch=2 * 5e-6 / 3)

    @property
    def area(self) -> float:
        """Charge-collecting cross-section, aperture x thickness (m^2)."""
        return self.aperture * self.film_thickness

    def electrodes(self) -> list[tuple[float, float, str]]:
        """``(x_start, x_end, role)`` with role ``"driven"`` or ``"ground"``."""
        c, w, g = self.cell_width / 2, self.electrode_width, self.electrode_gap
        if self.layout == "single_pair":
            return [(c - g / 2 - w, c - g / 2, "driven"), (c + g / 2, c + g / 2 + w, "ground")]
        h = self.split_pitch / 2
        out = [(c - h - g / 2 - w, c - h - g / 2, "driven"), (c - h + g / 2, c - h + g / 2 + w, "ground"),
               (c + h - g / 2 - w, c + h - g / 2, "ground"), (c + h + g / 2, c + h + g / 2 + w, "driven")]
        if out[2][0] - out[1][1] <= 1e-15:
            out[1:3] = [(out[1][0], out[2][1], "ground")]
        return out

    def active_gaps(self) -> list[tuple[float, float, int]]:
        """Gaps between opposite electrodes, ``(x_start, x_end, field_sign)``.

        ``field_sign`` is +1 when the driven electrode is on the left, i.e.
        the field under positive drive points along +x.
        """
        el = self.electrodes()
        gaps = []
        for (a0, a1, ra), (b0, b1, rb) in zip(el, el[1:]):
            if ra != rb:
                gaps.append((a1, b0, 1 if ra == "driven" else -1))
        return gaps


@dataclass(frozen=True)
class MaterialParams:
    """Effective film constants for the lateral (S0) mode.

    eps3 is relative; c_eff in Pa; e_eff in C/m^2 (sign = poling direction).
    """

    eps3: float
    c_eff: float
    e_eff: float
    rho: float = BTO_DENSITY
    q_mech: float = 200.0
    tan_delta: float = 0.0

    def __post_init__(self):
        if not self.eps3 >= 1:
            raise ModelError(f"eps3 must be >= 1, got {self.eps3}")
        if not (self.c_eff > 0 and self.rho > 0 and self.q_mech > 0):
            raise ModelError("c_eff, rho and q_mech must be > 0")
        if not self.tan_delta >= 0:
            raise ModelError("tan_delta must be >= 0")

    def with_(self, **kw) -> MaterialParams:
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("eps3", "c_eff", "e_eff", "rho", "q_mech", "tan_delta")}


@dataclass(frozen=True)
class Region:
    extent: float
    material: MaterialParams
    poling_sign: int = 1
    modulated: bool = False

    def __post_init__(self):
        if self.poling_sign not in (-1, 0, 1):
            raise ModelError(f"poling_sign must be -1, 0 or +1, got {self.poling_sign}")
        if not self.extent > 0:
            raise ModelError("region extent must be > 0")

    @property
    def e(self) -> float:
        return self.poling_sign * self.material.e_eff


RegionMap = tuple[Region, ...]


def build_regions(g: Geometry, gap_material: MaterialParams,
                  base_material: MaterialParams | None = None, bias_sign: int = 1) -> RegionMap:
    """Region map where only the electrode gaps carry the biased material.

    Gap regions are poled along their own field times ``bias_sign`` and
    flagged ``modulated``; everything else uses ``base_material``.
    """
    base = base_material or gap_material
    cuts = [0.0]
    for a, b, _ in g.active_gaps():
        cuts += [a, b]
    cuts.append(g.cell_width)
    gaps = {(a, b): s for a, b, s in g.active_gaps()}
    regions = []
    for a, b in zip(cuts, cuts[1:]):
        if b - a <= 1e-15:
            continue
        if (a, b) in gaps:
            regions.append(Region(b - a, gap_material, gaps[(a, b)] * bias_sign, True))
        else:
            regions.append(Region(b - a, base, bias_sign, False))
    return tuple(regions)


class Resonance(NamedTuple):
    fs: float
    fp: float
    mode_order: int


@dataclass(frozen=True, eq=False)
class DiscreteModel:
    """Assembled and condensed finite-element model of one cell (per unit area).

    Attributes:
        x: node coordinates (m).
        geometry, regions: the inputs.
        elem_region: region index of each element.
        driven, ground: electrode node indices.
        K_uu, M, K_uphi, K_ee: assembled matrices (node-ordered).
        K_star, F, C_s: condensed stiffness, drive vector, clamped capacitance.
        lam, gamma, modes: mechanical eigenvalues (rad^2/s^2), modal drive
            ``psi^T F`` and mass-normalized mode shapes (columns), rigid mode dropped.
    """

    x: np.ndarray
    geometry: Geometry
    regions: RegionMap
    elem_region: np.ndarray
    driven: np.ndarray
    ground: np.ndarray
    K_uu: np.ndarray
    M: np.ndarray
    K_uphi: np.ndarray
    K_ee: np.ndarray
    K_star: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)
    C_s: complex = 0j
    lam: np.ndarray = field(default=None, repr=False)
    gamma: np.ndarray = field(default=None, repr=False)
    modes: np.ndarray = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.x.size

    @property
    def n_elements(self) -> int:
        return self.x.size - 1

    @property
    def coupling_is_zero(self) -> bool:
        return not np.any(self.K_uphi)

    @property
    def mode_freqs(self) -> np.ndarray:
        """Short-circuit modal frequencies (Hz), ascending."""
        return np.sqrt(self.lam.real) / (2 * np.pi)


def bar_frequency(width: float, c: float, rho: float, order: int = 1) -> float:
    """Free-free bar resonance ``order / (2 width) * sqrt(c / rho)``."""
    return order / (2 * width) * math.sqrt(c / rho)


def _breakpoints(g: Geometry, regions: RegionMap) -> np.ndarray:
    pts = [0.0]
    for r in regions:
        pts.append(pts[-1] + r.extent)
    for a, b, _ in g.electrodes():
        pts += [a, b]
    pts = np.unique(np.round(np.array(pts) / g.cell_width, 12)) * g.cell_width
    return pts[(pts >= 0) & (pts <= g.cell_width * (1 + 1e-12))]


def build_model(g: Geometry, regions: RegionMap, elements_per_wavelength: int = 40,
                max_mode: int = 5) -> DiscreteModel:
    """Mesh one cell, assemble, condense the potentials and solve the modes.

    The element size resolves ``elements_per_wavelength`` elements per
    wavelength of the ``max_mode``-th lateral harmonic.

    Raises:
        ModelError: region extents do not span the cell, or bad mesh density.
    """
    if elements_per_wavelength < 10:
        raise ModelError("elements_per_wavelength must be >= 10")
    regions = tuple(regions)
    if not regions:
        raise ModelError("empty region map")
    total = sum(r.extent for r in regions)
    if abs(total - g.cell_width) > 1e-9 * g.cell_width:
        raise ModelError(f"region extents sum to {total:.6g} m, cell is {g.cell_width:.6g} m")

    h_target = 2 * g.cell_width / max_mode / elements_per_wavelength
    pts = _breakpoints(g, regions)
    pts[-1] = g.cell_width
    xs = [pts[:1]]
    for a, b in zip(pts, pts[1:]):
        n = max(2, math.ceil((b - a) / h_target - 1e-9))
        xs.append(np.linspace(a, b, n + 1)[1:])
    x = np.concatenate(xs)
    n = x.size

    edges = np.cumsum([0.0] + [r.extent for r in regions])
    mids = 0.5 * (x[:-1] + x[1:])
    elem_region = np.clip(np.searchsorted(edges, mids, side="right") - 1, 0, len(regions) - 1)

    K_uu = np.zeros((n, n), complex)
    M = np.zeros((n, n))
    K_up = np.zeros((n, n))
    K_ee = np.zeros((n, n), complex)
    unit = np.array([[1.0, -1.0], [-1.0, 1.0]])
    mass = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6
    for k in range(n - 1):
        r = regions[elem_region[k]]
        m = r.material
        h = x[k + 1] - x[k]
        sl = slice(k, k + 2)
        K_uu[sl, sl] += m.c_eff * (1 + 1j / m.q_mech) / h * unit
        M[sl, sl] += m.rho * h * mass
        K_up[sl, sl] += r.e / h * unit
        K_ee[sl, sl] += EPS0 * m.eps3 * (1 - 1j * m.tan_delta) / h * unit

    tol = 1e-9 * g.cell_width
    driven, ground = [], []
    for a, b, role in g.electrodes():
        idx = np.flatnonzero((x >= a - tol) & (x <= b + tol))
        (driven if role == "driven" else ground).extend(idx.tolist())
    driven = np.array(sorted(set(driven)), int)
    ground = np.array(sorted(set(ground)), int)
    fixed = np.zeros(n, bool)
    fixed[driven] = fixed[ground] = True
    free = np.flatnonzero(~fixed)

    # condense free potentials: phi_f = Kff^-1 (K_pu,f u - K_ee,fd 1)
    Kff = K_ee[np.ix_(free, free)]
    Kfd1 = K_ee[np.ix_(free, driven)].sum(axis=1)
    Kuf = K_up[:, free]
    Kud1 = K_up[:, driven].sum(axis=1)
    if free.size:
        sol = scipy.linalg.solve(Kff, np.column_stack([Kuf.T, Kfd1]), assume_a="sym")
        A_fu, a_fd = sol[:, :-1], sol[:, -1]
    else:
        A_fu, a_fd = np.zeros((0, n)), np.zeros(0)
    K_star = K_uu + Kuf @ A_fu
    F = -(Kud1 - Kuf @ a_fd)
    Kdd1 = K_ee[np.ix_(driven, driven)].sum()
    C_s = Kdd1 - K_ee[np.ix_(driven, free)].sum(axis=0) @ a_fd

    lam, vecs = scipy.linalg.eig(K_star, M)
    order = np.argsort(lam.real)
    lam, vecs = lam[order], vecs[:, order]
    norm = np.sqrt(np.einsum("ij,ik,kj->j", vecs, M, vecs))
    vecs = vecs / norm
    keep = np.abs(lam) > 1e-9 * np.abs(lam).max()
    lam, vecs = lam[keep], vecs[:, keep]
    gamma = vecs.T @ F

    for a in (x, elem_region, driven, ground, K_uu, M, K_up, K_ee, K_star, F, lam, gamma, vecs):
        a.flags.writeable = False
    return DiscreteModel(x, g, regions, elem_region, driven, ground, K_uu, M, K_up, K_ee,
                         K_star, F, complex(C_s), lam, gamma, vecs)


def _modal_sum(m: DiscreteModel, w: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    den = m.lam[None, :] - (w**2)[:, None]
    tiny = np.abs(den) <= 1e-13 * np.abs(m.lam)[None, :]
    if tiny.any():
        raise SingularSystemError(float(freqs[np.argmax(tiny.any(axis=1))]))
    return (m.gamma**2 / den).sum(axis=1)


def harmonic_admittance(m: DiscreteModel, freqs, n_cells: int | None = None,
                        aperture: float | None = None,
                        method: Literal["modal", "direct"] = "modal") -> AdmittanceSpectrum:
    """Admittance of ``n_cells`` identical cells driven at unit voltage.

    ``method="direct"`` solves the full coupled system per frequency and is
    kept as an independent check of the modal expansion.
    """
    g = m.geometry
    n_cells = g.n_cells if n_cells is None else n_cells
    aperture = g.aperture if aperture is None else aperture
    area = aperture * g.film_thickness
    freqs = np.asarray(freqs, dtype=float)
    w = 2 * np.pi * freqs
    if method == "modal":
        q = m.C_s + _modal_sum(m, w, freqs)
    elif method == "direct":
        q = np.array([_direct_charge(m, wk, fk) for wk, fk in zip(w, freqs)])
    else:
        raise ValueError(f"unknown method {method!r}")
    return AdmittanceSpectrum(freqs, 1j * w * area * q * n_cells)


def _direct_charge(m: DiscreteModel, w: float, f: float) -> complex:
    """Charge per unit area on the driven electrode for unit drive, full system."""
    n = m.n_nodes
    fixed = np.zeros(n, bool)
    fixed[m.driven] = fixed[m.ground] = True
    free = np.flatnonzero(~fixed)
    A = np.block([
        [m.K_uu - w**2 * m.M, m.K_uphi[:, free]],
        [m.K_uphi[free, :], -m.K_ee[np.ix_(free, free)]],
    ])
    rhs = -np.concatenate([m.K_uphi[:, m.driven].sum(axis=1), -m.K_ee[np.ix_(free, m.driven)].sum(axis=1)])
    try:
        lu = scipy.linalg.lu_factor(A, check_finite=False)
    except (np.linalg.LinAlgError, ValueError):
        raise SingularSystemError(f) from None
    if np.any(np.abs(np.diag(lu[0])) < 1e-300):
        raise SingularSystemError(f)
    sol = scipy.linalg.lu_solve(lu, rhs, check_finite=False)
    u, phi_f = sol[:n], sol[n:]
    # reaction on the driven node set; charge = -reaction
    react = (m.K_uphi[m.driven, :] @ u).sum() - (m.K_ee[np.ix_(m.driven, free)] @ phi_f).sum() \
        - m.K_ee[np.ix_(m.driven, m.driven)].sum()
    return -react


def modal_branches(m: DiscreteModel, n_cells: int | None = None,
                   aperture: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode ``(f_n, cm_n)``: modal frequency (Hz) and motional capacitance (F).

    Each mode is an ``lm``/``cm`` branch of an equivalent circuit with
    ``cm_n = A n_cells G_n^2 / lam_n``.
    """
    g = m.geometry
    n_cells = g.n_cells if n_cells is None else n_cells
    aperture = g.aperture if aperture is None else aperture
    area = aperture * g.film_thickness
    cm = area * n_cells * m.gamma**2 / m.lam
    return m.mode_freqs, cm


def modal_admittance(m: DiscreteModel, freqs, mode: int, n_cells: int | None = None,
                     aperture: float | None = None) -> np.ndarray:
    """Motional admittance of one mechanical mode (0-based index into ``m.lam``)."""
    g = m.geometry
    n_cells = g.n_cells if n_cells is None else n_cells
    aperture = g.aperture if aperture is None else aperture
    w = 2 * np.pi * np.asarray(freqs, dtype=float)
    return 1j * w * aperture * g.film_thickness * n_cells * m.gamma[mode] ** 2 / (m.lam[mode] - w**2)


def static_capacitance(m: DiscreteModel, n_cells: int | None = None,
                       aperture: float | None = None) -> float:
    """``Im(Y)/w`` at one hundredth of the first mechanical resonance (F)."""
    f = m.mode_freqs[0] / 100
    y = harmonic_admittance(m, [f], n_cells, aperture).y[0]
    return float(y.imag / (2 * np.pi * f))


def _dmag_dw(m: DiscreteModel, w: float, area: float) -> float:
    den = m.lam - w**2
    s = m.C_s + np.sum(m.gamma**2 / den)
    ds = np.sum(2 * w * m.gamma**2 / den**2)
    y = 1j * w * area * s
    dy = 1j * area * (s + w * ds)
    return float((np.conj(y) * dy).real / abs(y))


def _displacement(m: DiscreteModel, w: float) -> np.ndarray:
    return m.modes @ (m.gamma / (m.lam - w**2))


def _sign_changes(u: np.ndarray) -> int:
    k = int(np.argmax(np.abs(u)))
    v = (u * np.exp(-1j * np.angle(u[k]))).real
    v = v[np.abs(v) > 1e-3 * np.abs(v).max()]
    return int(np.count_nonzero(np.diff(np.sign(v))))


def find_resonances(m: DiscreteModel, band: tuple[float, float], n_grid: int = 4001,
                    rtol: float = 1e-6) -> list[Resonance]:
    """Series/parallel pairs in ``band`` from the extrema of ``|Y|``.

    Extrema are bracketed on a uniform grid and refined by bisection on the
    sign of ``d|Y|/dw`` (analytic from the modal form).  ``mode_order`` is
    the number of sign changes of the displacement at ``fs``.

    Raises:
        NoResonanceError: no admittance maximum in the band.
    """
    f_lo, f_hi = band
    f = np.linspace(f_lo, f_hi, n_grid)
    area = m.geometry.area
    mag = np.abs(harmonic_admittance(m, f, n_cells=1).y)
    dm = np.diff(mag)
    peaks = [i for i in range(1, n_grid - 1) if dm[i - 1] > 0 and dm[i] <= 0]
    dips = [i for i in range(1, n_grid - 1) if dm[i - 1] < 0 and dm[i] >= 0]
    if not peaks:
        raise NoResonanceError(f"no resonance between {f_lo:g} and {f_hi:g} Hz")

    def refine(i):
        a, b = 2 * np.pi * f[i - 1], 2 * np.pi * f[i + 1]
        fa, fb = _dmag_dw(m, a, area), _dmag_dw(m, b, area)
        if fa * fb > 0:
            return f[i]
        return brentq(lambda ww: _dmag_dw(m, ww, area), a, b, xtol=1e-300, rtol=rtol * 1e-3) / (2 * np.pi)

    out = []
    for j, i in enumerate(peaks):
        nxt = peaks[j + 1] if j + 1 < len(peaks) else n_grid
        dip = [d for d in dips if i < d < nxt]
        if not dip:
            continue
        fs, fp = refine(i), refine(dip[0])
        order = _sign_changes(_displacement(m, 2 * np.pi * fs))
        out.append(Resonance(float(fs), float(fp), order))
    if not out:
        raise NoResonanceError(f"no series/parallel pair between {f_lo:g} and {f_hi:g} Hz")
    return out
