"""Command-line front end.

Subcommands: fit, extract, sweep, adl, simulate, synth.  Exit codes:
0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .adl import GateError, q_from_propagation, regress_propagation
from .extract import ExtractionError, extract_sweep
from .lamb1d import (Geometry, MaterialParams, ModelError, NoResonanceError, build_model, build_regions,
                     find_resonances, harmonic_admittance, modal_branches, static_capacitance)
from .manifest import (ManifestError, ModelConfig, Record, load_manifest, load_model_config, load_record,
                       write_manifest, write_model_config)
from .mbvd import MbvdFit, MbvdParams, compute_fom, fit_mbvd, fom_from_frequencies
from .network import (Metadata, Network, NetworkError, device_admittance, one_port_admittance,
                      series_element_network)
from .reports import make_report, read_report, write_csv, write_json
from .sweeps import (SweepError, branch_separation, coercive_field, coercive_field_from_voltage,
                     split_hysteresis, tcf, trend_table, tunability)
from .synth import DelayLineSet, bias_trajectories, synth_adl, synth_mbvd_network, synth_sweep
from .touchstone import TouchstoneError, save_touchstone

log = logging.getLogger("ferroq")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
DATA_ERRORS = (ManifestError, NetworkError, TouchstoneError, ExtractionError, SweepError, GateError,
               ModelError, NoResonanceError, OSError, ValueError, KeyError)
NUMERIC_ERRORS = (ArithmeticError, np.linalg.LinAlgError)


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _default_jobs() -> int:
    raw = os.environ.get("FERROQ_JOBS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"FERROQ_JOBS must be an integer, got {raw!r}") from None


def _pmap(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(jobs) as ex:
        return list(ex.map(fn, items))


def _out(args) -> Path:
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


# ---------------------------------------------------------------- fit

def _admittance(net: Network):
    return device_admittance(net) if net.n_ports == 2 else one_port_admittance(net)


def _fit_record(rec: Record, band) -> dict:
    row = {"path": str(rec.path), **{k: v for k, v in asdict(rec.meta).items() if k != "label"},
           "label": rec.meta.label}
    try:
        net = load_record(rec)
        row.update({k: v for k, v in asdict(net.meta).items() if v not in (None, "")})
        y = _admittance(net)
        if band:
            y = y.window(*band)
        fit = fit_mbvd(y)
        fom = compute_fom(fit.params)
    except DATA_ERRORS as exc:
        return {**row, "ok": False, "error": f"{type(exc).__name__}: {exc}", "kind": "data"}
    except NUMERIC_ERRORS as exc:
        return {**row, "ok": False, "error": f"{type(exc).__name__}: {exc}", "kind": "numeric"}
    if not fit.converged:
        log.warning("%s: fit did not converge", rec.path)
    return {**row, "ok": True, "fit": fit.to_dict(include_freqs=True), "fom": fom.to_dict()}


_FIT_COLUMNS = ["path", "bias_voltage", "sweep_direction", "temperature", "ok", "fs", "fp", "c0", "r0", "rs",
                "rm", "lm", "cm", "k2_cm_ratio", "k2_freq_sep", "k2_pi2_8", "k2_ieee_176", "q_bode_max",
                "q_motional", "residual_rms", "converged", "error"]


def _fit_row(r: dict) -> dict:
    row = {k: r.get(k) for k in ("path", "bias_voltage", "sweep_direction", "temperature", "ok", "error")}
    if r["ok"]:
        row.update(r["fit"]["params"])
        fom = r["fom"]
        row.update(fs=fom["fs"], fp=fom["fp"], q_bode_max=fom["q_bode_max"], q_motional=fom["q_motional"],
                   residual_rms=r["fit"]["residual_rms"], converged=r["fit"]["converged"])
        row.update({f"k2_{k}": v for k, v in fom["k2"].items()})
    return row


def cmd_fit(args) -> int:
    records = load_manifest(args.manifest)
    band = tuple(args.band) if args.band else None
    if band and not band[0] < band[1]:
        raise UsageError("--band needs F_LO < F_HI")
    results = _pmap(lambda r: _fit_record(r, band), records, args.jobs)
    out = _out(args)
    config = {"manifest": str(Path(args.manifest).resolve()), "band": band, "jobs": args.jobs,
              "lenient": args.lenient}
    for r in results:
        if not r["ok"]:
            log.warning("%s: %s", r["path"], r["error"])
    write_json(out / "fit_report.json", make_report("fit", config, records=results))
    write_csv(out / "fits.csv", [_fit_row(r) for r in results], _FIT_COLUMNS)
    n_ok = sum(r["ok"] for r in results)
    log.info("fitted %d of %d records", n_ok, len(results))
    if n_ok == 0:
        return EXIT_NUMERIC if all(r.get("kind") == "numeric" for r in results) else EXIT_DATA
    if n_ok < len(results) and not args.lenient:
        return EXIT_DATA
    return EXIT_OK


def _load_fits(path) -> list[dict]:
    doc = read_report(path, "fit")
    recs = [r for r in doc.get("records", []) if r.get("ok")]
    if not recs:
        raise ManifestError(f"{path}: fit report holds no successful fits")
    return recs


# ---------------------------------------------------------------- extract

def cmd_extract(args) -> int:
    recs = _load_fits(args.fit_report)
    cfg = load_model_config(args.model)
    sweep = []
    for r in recs:
        if r.get("bias_voltage") is None:
            raise ManifestError(f"{r['path']}: record has no bias_voltage")
        if args.direction and r.get("sweep_direction") not in (None, args.direction):
            continue
        sweep.append((float(r["bias_voltage"]), MbvdFit.from_dict(r["fit"])))
    if not any(v == 0 for v, _ in sweep):
        raise ExtractionError("fit report has no V = 0 record (baseline)")
    points = extract_sweep(sweep, cfg.geometry, cfg.material, n_passes=args.passes,
                           elements_per_wavelength=args.epw, jobs=args.jobs)
    out = _out(args)
    config = {"fit_report": str(Path(args.fit_report).resolve()), "model": cfg.to_dict(),
              "passes": args.passes, "epw": args.epw, "direction": args.direction}
    rows = [p.to_dict() for p in points]
    write_json(out / "extraction.json", make_report("extract", config, points=rows))
    write_csv(out / "extraction.csv", rows, ["voltage", "eps3", "c_eff", "e_eff", "ok", "n_passes", "error"])
    failed = [p for p in points if not p.ok]
    for p in failed:
        log.warning("V = %g: %s", p.voltage, p.error)
    return EXIT_NUMERIC if len(failed) == len(points) else EXIT_OK


# ---------------------------------------------------------------- sweep

def cmd_sweep(args) -> int:
    if args.vc is not None:
        cf = coercive_field_from_voltage(args.vc, args.gap)
        out = _out(args)
        write_json(out / "sweep_report.json",
                   make_report("sweep", {"vc": args.vc, "gap": args.gap}, coercive=cf.to_dict()))
        print(f"Ec = {cf.ec / 1e6:.4g} MV/m")
        return EXIT_OK
    if not args.fit_report:
        raise UsageError("sweep needs a fit report or --vc")
    recs = _load_fits(args.fit_report)
    rows = []
    for r in recs:
        fom = r["fom"]
        rows.append({"bias_voltage": r.get("bias_voltage"), "temperature": r.get("temperature"),
                     "sweep_direction": r.get("sweep_direction"), "fs": fom["fs"], "fp": fom["fp"],
                     "c0": fom["c0"], "q_bode_max": fom["q_bode_max"], "q_motional": fom["q_motional"],
                     **{f"k2_{k}": v for k, v in fom["k2"].items()}})
    report: dict = {}
    out = _out(args)
    biased = [r for r in rows if r["bias_voltage"] is not None]
    if biased:
        v = np.array([r["bias_voltage"] for r in biased])
        fwd, bwd = split_hysteresis(v, np.arange(v.size, dtype=float))
        idx = {"forward": fwd.value.astype(int), "backward": bwd.value.astype(int)}
        branches = {}
        for name, ii in idx.items():
            if ii.size == 0:
                continue
            sel = [biased[i] for i in ii]
            vv = v[ii]
            entry = {}
            for q in ("fs", "fp"):
                try:
                    t = tunability(vv, [r[q] for r in sel])
                    entry[f"tunability_{q}"] = {"shift": t.shift, "max_abs": t.max_abs}
                except SweepError as exc:
                    entry[f"tunability_{q}"] = {"error": str(exc)}
            try:
                entry["coercive"] = coercive_field(vv, [r[args.quantity] for r in sel], args.gap).to_dict()
            except SweepError as exc:
                entry["coercive"] = {"error": str(exc)}
            branches[name] = entry
            for r in sel:
                r["sweep_direction"] = name
        if idx["backward"].size >= 2 and idx["forward"].size >= 2:
            f1, b1 = split_hysteresis(v, np.array([r[args.quantity] for r in biased]))
            c, sep, v_at = branch_separation(f1, b1)
            report["branch_separation"] = {"control": c, "separation": sep, "v_max_separation": v_at}
        report["branches"] = branches
        write_csv(out / "bias_trends.csv", trend_table(biased, "bias_voltage",
                  ["fs", "fp", "c0", "q_bode_max", "q_motional", "k2_freq_sep", "k2_pi2_8"]))
    heated = [r for r in rows if r["temperature"] is not None]
    if len({r["temperature"] for r in heated}) >= 3:
        res = tcf([r["temperature"] for r in heated], [r["fs"] for r in heated])
        report["tcf"] = res.to_dict()
        write_csv(out / "temperature_trends.csv", trend_table(heated, "temperature", ["fs", "fp", "q_bode_max"]))
    if not report:
        raise SweepError("fit report has neither bias nor temperature series")
    config = {"fit_report": str(Path(args.fit_report).resolve()), "gap": args.gap, "quantity": args.quantity}
    write_json(out / "sweep_report.json", make_report("sweep", config, **report))
    return EXIT_OK


# ---------------------------------------------------------------- adl

def cmd_adl(args) -> int:
    records = load_manifest(args.manifest)
    nets = []
    for rec in records:
        net = load_record(rec)
        if net.meta.delay_length is None:
            raise ManifestError(f"{rec.path}: record has no delay_length")
        nets.append((net.meta.delay_length, net))
    f0 = args.f0 if args.f0 else float(np.median(nets[0][1].freqs))
    band = tuple(args.band) if args.band else (f0 - 5e6, f0 + 5e6)
    try:
        dset = DelayLineSet(tuple(nets), f0, band)
    except ValueError as exc:
        raise ManifestError(str(exc)) from None
    gate = None if args.gate == "none" else "auto"
    res = regress_propagation(dset, gate=gate, half_width=args.half_width, band=band)
    q = q_from_propagation(f0, res.alpha, res.vg) if res.alpha > 0 else None
    out = _out(args)
    config = {"manifest": str(Path(args.manifest).resolve()), "f0": f0, "band": band, "gate": args.gate,
              "half_width": args.half_width}
    write_json(out / "adl_summary.json", make_report("adl", config, **res.to_dict(), q=q, table=res.table()))
    write_csv(out / "adl.csv", res.table(), ["length_m", "il_db", "tau_s"])
    print(f"alpha = {res.alpha:.6g} Np/m, vg = {res.vg:.6g} m/s, Q = {q if q is None else round(q, 3)}")
    return EXIT_OK


# ---------------------------------------------------------------- simulate

def _simulate(cfg: ModelConfig, band, n_points, epw, n_cells=None):
    g = cfg.geometry
    m = build_model(g, build_regions(g, cfg.material, cfg.base_material), epw)
    freqs = np.linspace(band[0], band[1], n_points)
    y = harmonic_admittance(m, freqs, n_cells=n_cells)
    return m, y


def cmd_simulate(args) -> int:
    cfg = load_model_config(args.model)
    band = tuple(args.band)
    if not 0 < band[0] < band[1]:
        raise UsageError("--band needs 0 < F_LO < F_HI")
    m, y = _simulate(cfg, band, args.points, args.epw, args.n_cells)
    n_cells = args.n_cells or cfg.geometry.n_cells
    res = find_resonances(m, band)
    fn, cm = modal_branches(m, n_cells)
    resonances = []
    for r in res:
        k2 = fom_from_frequencies(r.fs, r.fp)
        resonances.append({"fs": r.fs, "fp": r.fp, "mode_order": r.mode_order, "k2": k2})
    dominant = max(resonances, key=lambda r: r["k2"]["freq_sep"])
    report = {"resonances": resonances, "overmoded": len(resonances) > 1,
              "dominant_mode_order": dominant["mode_order"],
              "static_capacitance": static_capacitance(m, n_cells),
              "modes": [{"f": float(f), "cm": float(abs(c))} for f, c in zip(fn, cm) if band[0] <= f <= band[1]],
              "n_nodes": m.n_nodes}
    if args.check_convergence:
        m2, _ = _simulate(cfg, band, 3, 2 * args.epw, args.n_cells)
        r2 = find_resonances(m2, band)
        shift = abs(r2[0].fs / res[0].fs - 1)
        report["convergence"] = {"epw": [args.epw, 2 * args.epw], "fs_rel_shift": shift, "ok": shift < 1e-4}
    out = _out(args)
    net = series_element_network(y, meta=Metadata(label="simulated"))
    save_touchstone(net, out / "simulated.s2p")
    config = {"model": cfg.to_dict(), "band": band, "points": args.points, "epw": args.epw, "n_cells": n_cells}
    write_json(out / "simulate_report.json", make_report("simulate", config, **report))
    for r in resonances:
        print(f"mode {r['mode_order']}: fs = {r['fs'] / 1e6:.3f} MHz, fp = {r['fp'] / 1e6:.3f} MHz, "
              f"k2 = {100 * r['k2']['freq_sep']:.2f}%")
    return EXIT_OK


# ---------------------------------------------------------------- synth

def _write_nets(out: Path, items: list[tuple[str, Network]]) -> list[Record]:
    recs = []
    for name, net in items:
        path = out / name
        save_touchstone(net, path)
        recs.append(Record(path, net.meta))
    write_manifest(recs, out / "manifest.json")
    return recs


def _bias_circuit(v: float) -> MbvdParams:
    """Circuit-level bias dependence: C0 229 fF -> 68.5 fF, fs down 2.3%, fp up 5.6%."""
    x = min(abs(v) / 39.0, 1.0)
    lor = 1 / (1 + (abs(v) / 12) ** 2)
    lor_end = 1 / (1 + (39 / 12) ** 2)
    c0 = 68.5e-15 + (229e-15 - 68.5e-15) * (lor - lor_end) / (1 - lor_end)
    fs = 707e6 * (1 - 0.023 * x)
    fp = 772e6 * (1 + 0.056 * x)
    return MbvdParams.from_resonance(fs, fp, c0, 150 + 25 * x, r0=2.0, rs=1.5)


def scenario_catalog() -> dict:
    return {
        "fem-bias": "FEM bias sweep 0..39 V with falling eps3, softening c_eff and rise-then-taper e_eff, plus model.json",
        "mbvd-bias": "circuit-level bias sweep, C0 229 -> 68.5 fF, fs -2.3 %, fp +5.6 %",
        "hysteresis": "0 -> 39 -> 0 V triangle with a hysteretic C0 loop",
        "temperature": "fs(T) at +58.3 ppm/K, 250..350 K",
        "adl": "five delay lines, Q = 169 at 1.65 GHz, with a triple-transit echo",
    }


def cmd_synth(args) -> int:
    out = _out(args)
    seed, noise = args.seed, args.noise
    scen = args.scenario
    items: list[tuple[str, Network]] = []
    extra = {}
    if scen == "fem-bias":
        tr = bias_trajectories()
        g = Geometry.bar_device()
        tpl = MaterialParams(eps3=2300.0, c_eff=1.06e11, e_eff=4.0)
        volts = np.arange(0, 40, args.step or 3.0)
        sweep = synth_sweep(tr["eps3"], tr["c_eff"], tr["e_eff"], g, volts, noise, seed, tpl)
        items = [(f"bias_{v:05.1f}V.s2p", n.with_meta(sweep_direction="forward")) for v, n in sweep]
        write_model_config(ModelConfig(g, tpl), out / "model.json")
        extra["truth"] = [{"voltage": v, "eps3": tr["eps3"](v), "c_eff": tr["c_eff"](v), "e_eff": tr["e_eff"](v)}
                          for v in volts]
    elif scen in ("mbvd-bias", "hysteresis"):
        if scen == "mbvd-bias":
            volts = np.linspace(0, 39, 10)
            dirs = ["forward"] * volts.size
        else:
            up = np.arange(0, 40, args.step or 3.0)
            volts = np.r_[up, up[::-1]]
            dirs = ["forward"] * up.size + ["backward"] * up.size
        for k, (v, d) in enumerate(zip(volts, dirs)):
            p = _bias_circuit(v)
            if scen == "hysteresis":
                # the backward branch lags: C0 stays higher on the way down
                lag = 6.0 if d == "backward" else 0.0
                p = _bias_circuit(max(v - lag, 0.0))
            f = np.linspace(600e6, 900e6, 801)
            net = synth_mbvd_network(p, f, noise_rel=noise, seed=seed + k,
                                     meta=Metadata(bias_voltage=float(v), sweep_direction=d))
            items.append((f"{scen}_{k:03d}.s2p", net))
    elif scen == "temperature":
        temps = np.arange(250.0, 351.0, 10.0)
        base = _bias_circuit(0.0)
        for k, t in enumerate(temps):
            scale = 1 + 58.3e-6 * (t - 300.0)
            p = MbvdParams(base.r0, base.c0, base.rs, base.rm, base.lm / scale**2, base.cm)
            f = np.linspace(600e6, 900e6, 801)
            items.append((f"temp_{t:.0f}K.s2p", synth_mbvd_network(p, f, noise_rel=noise, seed=seed + k,
                                                                   meta=Metadata(temperature=float(t)))))
        extra["truth"] = {"tcf_ppm_per_K": 58.3}
    elif scen == "adl":
        f0, vg = 1.65e9, 4000.0
        alpha = math.pi * f0 / (169 * vg)
        lengths = np.linspace(100e-6, 300e-6, 5)
        dset = synth_adl(alpha, vg, lengths, f0, seed=seed, noise_rel=noise, echo=0.3)
        items = [(f"adl_{L * 1e6:.0f}um.s2p", n) for L, n in dset.records]
        extra["truth"] = {"alpha": alpha, "vg": vg, "q": 169.0}
    else:
        raise UsageError(f"unknown scenario {scen!r}; choose from {sorted(scenario_catalog())}")
    _write_nets(out, items)
    config = {"scenario": scen, "seed": seed, "noise": noise, "step": args.step}
    write_json(out / "synth_report.json", make_report("synth", config, files=[n for n, _ in items], **extra))
    print(f"wrote {len(items)} files to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ferroq", description="Ferroelectric resonator analysis toolkit.")
    p.add_argument("--version", action="version", version=f"ferroq {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, jobs=False):
        sp.add_argument("--out", "-o", default=".", help="output directory")
        if jobs:
            sp.add_argument("--jobs", "-j", type=int, default=None, help="worker threads (default $FERROQ_JOBS or 1)")

    s = sub.add_parser("fit", help="fit mBVD circuits to every record of a manifest")
    s.add_argument("manifest")
    s.add_argument("--band", nargs=2, type=float, metavar=("F_LO", "F_HI"), help="fit window (Hz)")
    s.add_argument("--lenient", action="store_true", help="exit 0 when some records fail")
    common(s, jobs=True)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("extract", help="material parameters versus bias from a fit report")
    s.add_argument("fit_report")
    s.add_argument("--model", required=True, help="geometry/material config JSON")
    s.add_argument("--passes", type=int, default=2, help="minimum outer refinement passes")
    s.add_argument("--epw", type=int, default=40, help="elements per wavelength")
    s.add_argument("--direction", choices=("forward", "backward"), default=None)
    common(s, jobs=True)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("sweep", help="tunability, hysteresis, coercive field and TCF")
    s.add_argument("fit_report", nargs="?")
    s.add_argument("--gap", type=float, default=1.35e-6, help="electrode gap (m)")
    s.add_argument("--quantity", choices=("c0", "fs", "fp"), default="c0")
    s.add_argument("--vc", type=float, default=None, help="report Ec for a given coercive voltage only")
    common(s)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("adl", help="propagation loss, group velocity and Q from delay lines")
    s.add_argument("manifest")
    s.add_argument("--gate", choices=("auto", "none"), default="auto")
    s.add_argument("--half-width", type=float, default=None, help="gate half width (s)")
    s.add_argument("--f0", type=float, default=None, help="center frequency (Hz)")
    s.add_argument("--band", nargs=2, type=float, metavar=("F_LO", "F_HI"), help="analysis band (Hz)")
    common(s)
    s.set_defaults(func=cmd_adl)

    s = sub.add_parser("simulate", help="run the 1D forward model")
    s.add_argument("model")
    s.add_argument("--band", nargs=2, type=float, required=True, metavar=("F_LO", "F_HI"))
    s.add_argument("--points", type=int, default=2001)
    s.add_argument("--epw", type=int, default=40)
    s.add_argument("--n-cells", type=int, default=None)
    s.add_argument("--check-convergence", action="store_true", help="repeat with a doubled mesh")
    common(s)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("synth", help="write a synthetic corpus",
                       epilog="scenarios: " + "; ".join(f"{k}: {v}" for k, v in scenario_catalog().items()))
    s.add_argument("scenario", choices=sorted(scenario_catalog()))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise", type=float, default=0.0, help="relative noise")
    s.add_argument("--step", type=float, default=None, help="bias step (V)")
    common(s)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError("missing subcommand")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s: %(message)s", stream=sys.stderr)
        if hasattr(args, "jobs") and args.jobs is None:
            args.jobs = _default_jobs()
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        return args.func(args)
    except UsageError as exc:
        print(f"ferroq: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS + (NumericalFailure,) as exc:
        print(f"ferroq: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DATA_ERRORS + (json.JSONDecodeError,) as exc:
        print(f"ferroq: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
