"""Modal content of the two electrode layouts.

The single-pair cell couples mainly to the fundamental lateral mode.  The
split-electrode cell puts its two poled gaps on the stress lobes of the
third harmonic, so the coupling moves up in frequency and the response
shows two bands.  The last part poles the two halves of one gap in
opposite directions and shows that the fundamental vanishes.
"""
import numpy as np

from ferroq.lamb1d import (Geometry, MaterialParams, Region, build_model, build_regions, find_resonances,
                           modal_admittance, modal_branches)

mat = MaterialParams(eps3=1500, c_eff=1.06e11, e_eff=15)

for name, g in (("single pair", Geometry.bar_device()), ("split electrode", Geometry.split_device())):
    m = build_model(g, build_regions(g, mat))
    f1 = m.mode_freqs[0]
    print(f"{name}: cell {g.cell_width * 1e6:.1f} um, first mode {f1 / 1e6:.0f} MHz")
    for r in find_resonances(m, (0.5 * f1, 3.3 * f1)):
        k2 = (r.fp**2 - r.fs**2) / r.fp**2
        print(f"  order {r.mode_order}: fs = {r.fs / 1e6:7.1f} MHz, fp = {r.fp / 1e6:7.1f} MHz, k2 = {100 * k2:.2f} %")
    fn, cm = modal_branches(m)
    print("  motional capacitance of the first five modes (fF):",
          " ".join(f"{abs(c) * 1e15:.2f}" for c in cm[:5]))

g = Geometry.bar_device()
(a, b, _), = g.active_gaps()
h = (b - a) / 2
for sign in (1, -1):
    regs = (Region(a, mat), Region(h, mat, 1), Region(h, mat, sign), Region(g.cell_width - b, mat))
    m = build_model(g, regs)
    y = np.abs(modal_admittance(m, [0.97 * m.mode_freqs[0]], 0))[0]
    print(f"gap halves poled {'aligned' if sign > 0 else 'opposite'}: |Y_mode1| = {y:.3e} S")
