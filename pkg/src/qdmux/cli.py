"""Command-line experiment runner.

Subcommands:

* ``spectrum``  -- sweep |S11| of one row's resonator for on- and off-state loads
* ``simulate``  -- run an addressing preset (or a program file) and write traces,
  demultiplexed maps, and a run manifest
* ``analyze``   -- apply a named analysis pipeline to recorded files
* ``sweep``     -- fully-settled control map of a single device

Exit codes: 0 success, 1 invalid configuration or arguments, 2 runtime
failure, 3 completed with fit non-convergence only.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .analysis import (
    extract_charging_energy,
    fit_lorentzian,
    fit_resonance,
    fit_retention,
    match_decay_peaks,
    min_integration_time,
    peak_report_row,
    resonance_report_row,
    snr,
    subtract_background,
)
from .chipconfig import ChipConfig, build_matrix, calibration_load, warm_resonator
from .errors import FitNonConvergence, ValidationError
from .iofiles import (
    read_columns,
    read_map,
    read_program,
    read_spectrum,
    read_trace,
    write_columns,
    write_manifest,
    write_map,
    write_program,
    write_report,
    write_spectrum,
    write_trace,
)
from .mux import (
    build_combined,
    build_freq_mux,
    build_time_mux,
    demux,
    run_retention,
    run_source_sweep,
    static_dc_map,
    static_dc_sweep,
    static_rf_map,
)
from .rf import reflection_coefficient

ENV_CONFIG = "QDMUX_CONFIG"

PRESETS = ("static-sweep", "diamonds", "time-mux", "freq-mux", "combined", "retention")
PIPELINES = ("background+peaks", "snr", "retention", "resonance", "diamonds")


def _load_config(path: str | None) -> ChipConfig:
    path = path or os.environ.get(ENV_CONFIG)
    if path is None:
        return ChipConfig.default()
    return ChipConfig.from_file(path)


def _parse_axis(spec: str, name: str) -> np.ndarray:
    try:
        start, stop, points = spec.split(":")
        axis = np.linspace(float(start), float(stop), int(points))
    except ValueError as exc:
        raise ValidationError(f"--{name} must be start:stop:points, got {spec!r}") from exc
    if axis.size < 2:
        raise ValidationError(f"--{name} needs at least 2 points")
    return axis


def _db(mag: np.ndarray) -> np.ndarray:
    return 20.0 * np.log10(np.maximum(mag, 1e-15))


def cmd_spectrum(args) -> int:
    cfg = _load_config(args.config)
    if args.points < 100:
        raise ValidationError("--points must be >= 100")
    chip = build_matrix(cfg)
    if not 1 <= args.row <= chip.n_rows:
        raise ValidationError(f"--row {args.row} outside 1..{chip.n_rows}")
    os.makedirs(args.out, exist_ok=True)
    t0 = time.time()
    freqs = np.linspace(args.f_min, args.f_max, args.points)
    ro = cfg.readout
    v_dl = 0.5 * (float(ro["dl_start"]) + float(ro["dl_end"]))
    spec = chip.row_resonators[args.row - 1]
    f_c = chip.row_carriers[args.row - 1]

    outputs = []
    base_cell = chip.cell(args.row, 1)
    loads = {
        "on": calibration_load(cfg, base_cell, chip.n_cols, f_c),
        "off": _off_load(cfg, base_cell, chip.n_cols, f_c),
    }
    for state, z_load in loads.items():
        mag = np.abs(reflection_coefficient(spec, z_load, freqs))
        path = os.path.join(args.out, f"spectrum_row{args.row}_{state}.txt")
        write_spectrum(
            path, freqs, _db(mag),
            {"row": args.row, "state": state, "z0": spec.z0, "v_dl": v_dl,
             "config_hash": cfg.digest()},
        )
        outputs.append(path)
    if args.warm:
        warm_targets = cfg.data.get("warm_resonance_ghz")
        if not warm_targets or len(warm_targets) < args.row:
            raise ValidationError("config lacks warm_resonance_ghz for this row")
        f_warm = float(warm_targets[args.row - 1]) * 1e9
        shifted, fraction = warm_resonator(spec, f_c, f_warm, loads["on"])
        mag = np.abs(reflection_coefficient(shifted, loads["on"], freqs))
        path = os.path.join(args.out, f"spectrum_row{args.row}_warm.txt")
        write_spectrum(
            path, freqs, _db(mag),
            {"row": args.row, "state": "warm", "z0": spec.z0,
             "cp_shift_fraction": fraction, "config_hash": cfg.digest()},
        )
        outputs.append(path)

    manifest = os.path.join(args.out, f"spectrum_row{args.row}_manifest.json")
    write_manifest(
        manifest, config_hash=cfg.digest(), program=f"spectrum row {args.row}",
        seed=cfg.seed, version=__version__, outputs=outputs,
        duration_s=time.time() - t0,
    )
    return 0


def _off_load(cfg: ChipConfig, cell, n_cols: int, f_probe: float) -> complex:
    from .cells import CellState, cell_branch_impedance, equilibrium_gate_voltage

    ro = cfg.readout
    v_dl = 0.5 * (float(ro["dl_start"]) + float(ro["dl_end"]))
    v_off = float(ro["v_wl_low"])
    off = CellState(
        device=cell.device, access=cell.access, c_cell=cell.c_cell, r_g=cell.r_g,
        v_g=equilibrium_gate_voltage(cell, v_dl, v_off), v_wl=v_off, v_dl=v_dl,
    )
    return cell_branch_impedance(off, f_probe) / n_cols


def _preset_program(cfg: ChipConfig, chip, preset: str):
    ro = cfg.readout
    ramp = (float(ro["dl_start"]), float(ro["dl_end"]), float(ro["dwell_s"]))
    common = dict(
        v_wl_high=float(ro["v_wl_high"]),
        v_wl_low=float(ro["v_wl_low"]),
        v_s=float(cfg.data["v_s"]),
        amplitude=float(ro["amplitude_v"]),
        sample_rate=float(ro["sample_rate_hz"]),
    )
    if preset == "time-mux":
        return build_time_mux(chip, [(1, 2), (1, 3), (1, 1)], dl_ramp=ramp, **common)
    if preset == "freq-mux":
        return build_freq_mux(chip, [(1, 2, ramp), (2, 2, ramp)], **common)
    if preset == "combined":
        return build_combined(
            chip, [[(1, 2), (1, 3)], [(2, 2), (2, 3)]],
            dwell=float(ro["dwell_s"]),
            dl_ramps={1: ramp[:2], 2: ramp[:2]},
            **common,
        )
    raise ValidationError(f"preset {preset!r} does not compile to a program")


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    noise = cfg.noise_model(seed)
    os.makedirs(args.out, exist_ok=True)
    t0 = time.time()
    outputs = []
    ro = cfg.readout

    if args.program:
        program = read_program(args.program)
        label = f"program file {os.path.basename(args.program)}"
    elif args.preset in ("time-mux", "freq-mux", "combined"):
        chip = build_matrix(cfg)
        program = _preset_program(cfg, chip, args.preset)
        label = f"preset {args.preset}"
    else:
        program = None
        label = f"preset {args.preset}"

    if program is not None:
        chip = build_matrix(cfg)
        program.validate_for(chip)
        prog_path = os.path.join(args.out, "program.json")
        write_program(prog_path, program)
        outputs.append(prog_path)
        v_s_axis = cfg.v_s_sweep()
        traces = run_source_sweep(chip, program, v_s_axis, noise)
        for n, trace in enumerate(traces):
            ramps = {}
            for k, seg in enumerate(program.segments):
                drive = seg.drives.get(f"V_DL{trace.row}")
                ramps[str(k)] = [drive.start, drive.end] if drive and drive.is_ramp else None
            path = os.path.join(args.out, f"trace_{n:04d}.txt")
            write_trace(path, trace, {"config_hash": cfg.digest(), "seed": seed,
                                      "dl_ramps": ramps})
            outputs.append(path)
        for smap in demux(traces, program, v_s_axis):
            path = os.path.join(args.out, f"map_Q{smap.device[0]}{smap.device[1]}.txt")
            write_map(path, smap, {"config_hash": cfg.digest(), "seed": seed})
            outputs.append(path)
    elif args.preset == "static-sweep":
        chip = build_matrix(cfg)
        v_dl_axis = np.linspace(float(ro["dl_start"]), float(ro["dl_end"]), 200)
        v_s_axis = cfg.v_s_sweep()
        for row, col in [(1, 2), (1, 3), (1, 1)]:
            smap = static_rf_map(
                chip, (row, col), v_dl_axis, v_s_axis, noise,
                v_wl_high=float(ro["v_wl_high"]), v_wl_low=float(ro["v_wl_low"]),
                amplitude=float(ro["amplitude_v"]),
            )
            path = os.path.join(args.out, f"static_Q{row}{col}.txt")
            write_map(path, smap, {"config_hash": cfg.digest(), "seed": seed})
            outputs.append(path)
    elif args.preset == "diamonds":
        chip = build_matrix(cfg)
        device = chip.cell(args.device[0], args.device[1]).device
        e_c_v = device.e_c / 1.602176634e-19
        v_dl_axis = np.linspace(float(ro["dl_start"]), float(ro["dl_start"]) + 0.11, 200)
        v_s_axis = np.linspace(-1.2 * e_c_v, 1.2 * e_c_v, 200)
        smap = static_dc_map(chip, tuple(args.device), v_dl_axis, v_s_axis,
                             v_wl=float(ro["v_wl_high"]))
        path = os.path.join(args.out, "diamonds.txt")
        write_map(path, smap, {"config_hash": cfg.digest(), "kind_hint": "dc_current"})
        outputs.append(path)
    elif args.preset == "retention":
        chip = build_matrix(cfg)
        rt = cfg.retention
        cell = chip.cell(args.device[0], args.device[1])
        record = run_retention(
            cell,
            v_wl_high=float(rt["v_wl_high"]), v_wl_low=float(rt["v_wl_low"]),
            v_dl=float(rt["v_dl"]), v_s=float(rt["v_s"]),
            t_charge=float(rt["t_charge_s"]), t_hold=float(rt["t_hold_s"]),
            sample_rate=float(rt["sample_rate_hz"]),
        )
        decay_path = os.path.join(args.out, "retention_decay.txt")
        write_columns(
            decay_path, {"t_s": record.t, "i_s_a": record.i_s, "v_g": record.v_g},
            {"t_release_s": record.t_release, "config_hash": cfg.digest()},
        )
        outputs.append(decay_path)
        v_axis = np.linspace(0.3, float(rt["v_dl"]), 2000)
        i_static = static_dc_sweep(cell, v_axis, v_wl=float(rt["v_wl_high"]),
                                   v_s=float(rt["v_s"]))
        static_path = os.path.join(args.out, "retention_static.txt")
        write_columns(static_path, {"v_dl": v_axis, "i_s_a": i_static},
                      {"config_hash": cfg.digest()})
        outputs.append(static_path)
    else:
        raise ValidationError(f"unknown preset {args.preset!r}")

    manifest = os.path.join(args.out, "manifest.json")
    write_manifest(
        manifest, config_hash=cfg.digest(), program=label, seed=seed,
        version=__version__, outputs=outputs, duration_s=time.time() - t0,
    )
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    chip = build_matrix(cfg)
    noise = cfg.noise_model(args.seed)
    os.makedirs(args.out, exist_ok=True)
    t0 = time.time()
    v_dl_axis = _parse_axis(args.dl, "dl")
    v_s_axis = _parse_axis(args.vs, "vs")
    device = tuple(args.device)
    ro = cfg.readout
    if args.kind == "rf":
        smap = static_rf_map(
            chip, device, v_dl_axis, v_s_axis, noise,
            v_wl_high=float(ro["v_wl_high"]), v_wl_low=float(ro["v_wl_low"]),
            amplitude=float(ro["amplitude_v"]),
        )
    else:
        smap = static_dc_map(chip, device, v_dl_axis, v_s_axis,
                             v_wl=float(ro["v_wl_high"]))
    path = os.path.join(args.out, f"sweep_Q{device[0]}{device[1]}_{args.kind}.txt")
    write_map(path, smap, {"config_hash": cfg.digest(), "kind_hint": args.kind})
    manifest = os.path.join(args.out, f"sweep_Q{device[0]}{device[1]}_manifest.json")
    write_manifest(
        manifest, config_hash=cfg.digest(),
        program=f"static {args.kind} sweep of {device}", seed=noise.seed,
        version=__version__, outputs=[path], duration_s=time.time() - t0,
    )
    return 0


def _analyze_peaks(args, records: list[dict], plot_cols: dict) -> int:
    failures = 0
    for path in args.inputs:
        trace, meta = read_trace(path)
        ramps = meta.get("dl_ramps", {})
        flat = subtract_background(trace, degree=args.degree)
        for k, window in enumerate(flat.segments):
            sel = flat.segment_mask(window)
            ramp = ramps.get(str(k))
            if window.active is None or ramp is None or sel.sum() < args.degree + 2:
                continue
            frac = (flat.t[sel] - window.t_start) / (window.t_end - window.t_start)
            v_dl = ramp[0] + (ramp[1] - ramp[0]) * frac
            y_seg = flat.v_mw[sel]
            rec = {
                "input": path,
                "segment": k,
                "device": list(window.active),
            }
            try:
                fit = fit_lorentzian(v_dl, y_seg, args.alpha)
                # quiet samples: away from the fitted peak and below the
                # robust ceiling, so neighbouring peaks do not count as noise
                mad = 1.4826 * np.median(np.abs(y_seg - np.median(y_seg)))
                quiet = (np.abs(v_dl - fit.center) > 3 * fit.fwhm) & (
                    y_seg < np.median(y_seg) + 3 * mad
                )
                sigma = float(np.std(y_seg[quiet], ddof=1)) if quiet.sum() >= 30 else float("nan")
                rec.update(peak_report_row(
                    fit, sigma, window.t_end - window.t_start, args.alpha,
                    label=f"Q{window.active[0]}{window.active[1]}",
                ))
                if args.pipeline == "snr" and quiet.sum() >= 30:
                    s = snr(fit, y_seg[quiet])
                    rec["snr"] = s
                    rec["t_min_s"] = min_integration_time(s, window.t_end - window.t_start)
                rec["status"] = "ok"
            except FitNonConvergence as exc:
                failures += 1
                rec.update({"status": "non-convergent", "error": str(exc)})
            records.append(rec)
        plot_cols[os.path.basename(path)] = {"t_s": flat.t, "v_mw": flat.v_mw}
    return failures


def cmd_analyze(args) -> int:
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    records: list[dict] = []
    plot_cols: dict = {}
    failures = 0

    if args.pipeline in ("background+peaks", "snr"):
        failures = _analyze_peaks(args, records, plot_cols)
    elif args.pipeline == "retention":
        decay_meta, decay = read_columns(args.inputs[0])
        static_meta, static = read_columns(args.inputs[1])
        try:
            points = match_decay_peaks(
                decay["t_s"], decay["i_s_a"], static["v_dl"], static["i_s_a"],
                n_peaks=args.n_peaks, t_min=float(decay_meta.get("t_release_s", 0.0)),
            )
            fit = fit_retention(points)
            records.append({
                "input": args.inputs[0], "status": "ok",
                "tau_s": fit.tau, "v0": fit.v0, "ratio": fit.ratio,
                "points": [[t, v] for t, v in points],
            })
        except FitNonConvergence as exc:
            failures += 1
            records.append({"input": args.inputs[0], "status": "non-convergent",
                            "error": str(exc)})
    elif args.pipeline == "resonance":
        for path in args.inputs:
            meta, freqs, s11_db = read_spectrum(path)
            try:
                fit = fit_resonance(freqs, 10.0 ** (s11_db / 20.0))
                rec = {"input": path, "status": "ok",
                       **resonance_report_row(fit, label=f"row {meta.get('row')}")}
            except FitNonConvergence as exc:
                failures += 1
                rec = {"input": path, "status": "non-convergent", "error": str(exc)}
            records.append(rec)
    elif args.pipeline == "diamonds":
        for path in args.inputs:
            smap = read_map(path)
            try:
                e_c = extract_charging_energy(smap)
                records.append({
                    "input": path, "status": "ok", "device": list(smap.device),
                    "e_c_j": e_c, "e_c_mev": e_c / 1.602176634e-19 * 1e3,
                })
            except (ValidationError, FitNonConvergence) as exc:
                failures += 1
                records.append({"input": path, "status": "failed", "error": str(exc)})
    else:
        raise ValidationError(f"unknown pipeline {args.pipeline!r}")

    write_report(args.out, records)
    if args.plot_data:
        os.makedirs(args.plot_data, exist_ok=True)
        for name, cols in plot_cols.items():
            write_columns(os.path.join(args.plot_data, f"plot_{name}"), cols)
    ok = sum(1 for r in records if r.get("status") == "ok")
    print(f"analyze: {ok} fits ok, {failures} failed, report {args.out}")
    return 3 if failures else 0


def _device_pair(text: str) -> tuple[int, int]:
    try:
        row, col = (int(x) for x in text.split(","))
        return row, col
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected row,col got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdmux",
        description="Simulated multiplexed microwave readout of a quantum-dot matrix",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrum", help="sweep |S11| of one row's resonator")
    sp.add_argument("--config", help=f"config file (default ${ENV_CONFIG} or built-in)")
    sp.add_argument("--row", type=int, default=1)
    sp.add_argument("--f-min", type=float, default=6.0e9)
    sp.add_argument("--f-max", type=float, default=8.5e9)
    sp.add_argument("--points", type=int, default=2001)
    sp.add_argument("--warm", action="store_true", help="also emit the 300 K variant")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_spectrum)

    sim = sub.add_parser("simulate", help="run an addressing preset or program file")
    sim.add_argument("--config")
    sim.add_argument("--preset", choices=PRESETS)
    sim.add_argument("--program", help="program JSON file (overrides --preset)")
    sim.add_argument("--device", type=_device_pair, default=(3, 3),
                     help="target device for diamonds/retention presets")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", help="static control map of one device")
    sw.add_argument("--config")
    sw.add_argument("--device", type=_device_pair, required=True)
    sw.add_argument("--dl", required=True, help="start:stop:points")
    sw.add_argument("--vs", required=True, help="start:stop:points")
    sw.add_argument("--kind", choices=("rf", "dc"), default="rf")
    sw.add_argument("--seed", type=int)
    sw.add_argument("--out", required=True)
    sw.set_defaults(func=cmd_sweep)

    an = sub.add_parser("analyze", help="apply an analysis pipeline to recorded files")
    an.add_argument("--pipeline", choices=PIPELINES, required=True)
    an.add_argument("--inputs", nargs="+", required=True)
    an.add_argument("--alpha", type=float, default=0.8)
    an.add_argument("--degree", type=int, default=5)
    an.add_argument("--n-peaks", type=int, default=4)
    an.add_argument("--plot-data", help="directory for x/y plot column files")
    an.add_argument("--out", required=True)
    an.set_defaults(func=cmd_analyze)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FitNonConvergence as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 2
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
