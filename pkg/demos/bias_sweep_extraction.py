"""Bias sweep from material trajectories back to material trajectories.

1. simulate a 15-cell bar at 0..39 V with a permittivity that drops ~3x,
   a slightly softening stiffness and a piezo coefficient that rises and tapers
2. fit an mBVD circuit to every simulated two-port
3. invert the fits for eps3, c_eff and e_eff and compare with the input

Takes a couple of minutes (the extraction runs the FEM model many times).
Pass --jobs N to use threads.
"""
import argparse
import time

import numpy as np

from ferroq.extract import extract_sweep
from ferroq.lamb1d import Geometry
from ferroq.mbvd import compute_fom, fit_mbvd
from ferroq.network import device_admittance
from ferroq.sweeps import tunability
from ferroq.synth import bias_trajectories, synth_sweep

ap = argparse.ArgumentParser()
ap.add_argument("--step", type=float, default=6.0)
ap.add_argument("--jobs", type=int, default=1)
ap.add_argument("--noise", type=float, default=0.0)
args = ap.parse_args()

g = Geometry.bar_device()
tr = bias_trajectories()
volts = np.arange(0, 40, args.step)

t0 = time.perf_counter()
sweep = synth_sweep(tr["eps3"], tr["c_eff"], tr["e_eff"], g, volts, noise_rel=args.noise, seed=1)
fits = [(v, fit_mbvd(device_admittance(net))) for v, net in sweep]
foms = [compute_fom(f.params) for _, f in fits]
print(f"simulated and fitted {len(fits)} bias points in {time.perf_counter() - t0:.1f} s")

fs = tunability(volts, [f.fs for f in foms])
fp = tunability(volts, [f.fp for f in foms])
print(f"fs shift at {volts[-1]:.0f} V: {100 * fs.shift[-1]:+.2f} %, fp: {100 * fp.shift[-1]:+.2f} %")

t0 = time.perf_counter()
points = extract_sweep(fits, g, jobs=args.jobs)
print(f"extraction took {time.perf_counter() - t0:.0f} s\n")

print("   V |  C0 (fF) |  eps3 fit / true  |  c_eff (GPa)  |  e_eff (C/m2) | passes")
for (v, fit), p in zip(fits, points):
    if not p.ok:
        print(f"{v:4.0f} | failed: {p.error}")
        continue
    m = p.material
    print(f"{v:4.0f} | {fit.params.c0 * 1e15:8.1f} | {m.eps3:7.0f} / {tr['eps3'](v):7.0f} "
          f"| {m.c_eff / 1e9:6.2f} / {tr['c_eff'](v) / 1e9:6.2f} "
          f"| {m.e_eff:5.2f} / {tr['e_eff'](v):5.2f} | {len(p.passes)}")
