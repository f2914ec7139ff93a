"""File formats: spectra, traces, stability maps, fit reports, run manifests.

Everything is delimited text with a JSON header (lines starting with ``# ``),
so the outputs diff cleanly and can be consumed by external plotting without
this package.  All writes go through a temp-file-plus-rename so a crashed run
never leaves a truncated output behind.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .errors import ValidationError
from .mux import Drive, Segment, SegmentWindow, StabilityMap, Trace, WaveformProgram
from .rf import Carrier, CarrierSet


def atomic_write_text(path, text: str):
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _header_lines(meta: dict) -> str:
    return "# " + json.dumps(meta, sort_keys=True) + "\n"


def _read_header(path) -> tuple[dict, list[str]]:
    meta = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if meta is None:
                    meta = json.loads(line.lstrip("# "))
                continue
            rows.append(line)
    if meta is None:
        raise ValidationError(f"{path}: missing JSON header line")
    return meta, rows


def write_spectrum(path, freqs, s11_db, meta: dict):
    header = _header_lines({"kind": "spectrum", **meta})
    body = "".join(f"{f:.10e} {s:.10e}\n" for f, s in zip(freqs, s11_db))
    atomic_write_text(path, header + body)


def read_spectrum(path) -> tuple[dict, np.ndarray, np.ndarray]:
    meta, rows = _read_header(path)
    if meta.get("kind") != "spectrum":
        raise ValidationError(f"{path}: not a spectrum file")
    data = np.array([[float(x) for x in row.split()] for row in rows])
    return meta, data[:, 0], data[:, 1]


def write_trace(path, trace: Trace, extra_meta: dict | None = None):
    meta = {
        "kind": "trace",
        "carrier": trace.carrier,
        "frequency_hz": trace.frequency,
        "row": trace.row,
        "source_voltage": trace.source_voltage,
        "seed_key": list(trace.seed_key),
        "segments": [
            {"t_start": w.t_start, "t_end": w.t_end,
             "active": list(w.active) if w.active else None}
            for w in trace.segments
        ],
        **(extra_meta or {}),
    }
    body = "".join(f"{t:.12e} {v:.12e}\n" for t, v in zip(trace.t, trace.v_mw))
    atomic_write_text(path, _header_lines(meta) + body)


def read_trace(path) -> tuple[Trace, dict]:
    meta, rows = _read_header(path)
    if meta.get("kind") != "trace":
        raise ValidationError(f"{path}: not a trace file")
    data = np.array([[float(x) for x in row.split()] for row in rows])
    windows = tuple(
        SegmentWindow(
            t_start=float(w["t_start"]),
            t_end=float(w["t_end"]),
            active=tuple(w["active"]) if w.get("active") else None,
        )
        for w in meta["segments"]
    )
    trace = Trace(
        carrier=int(meta["carrier"]),
        frequency=float(meta["frequency_hz"]),
        row=int(meta["row"]),
        t=data[:, 0],
        v_mw=data[:, 1],
        segments=windows,
        source_voltage=None if meta.get("source_voltage") is None else float(meta["source_voltage"]),
        seed_key=tuple(meta.get("seed_key", ())),
    )
    return trace, meta


def write_map(path, smap: StabilityMap, extra_meta: dict | None = None):
    meta = {
        "kind": "map",
        "device": list(smap.device),
        "v_dl": [float(v) for v in smap.v_dl],
        "v_s": [float(v) for v in smap.v_s],
        **(extra_meta or {}),
    }
    lines = ["".join(f"{v:.12e} " for v in row).rstrip() + "\n" for row in smap.values]
    atomic_write_text(path, _header_lines(meta) + "".join(lines))


def read_map(path) -> StabilityMap:
    meta, rows = _read_header(path)
    if meta.get("kind") != "map":
        raise ValidationError(f"{path}: not a map file")
    values = np.array([[float(x) for x in row.split()] for row in rows])
    return StabilityMap(
        device=tuple(meta["device"]),
        v_dl=np.array(meta["v_dl"], dtype=float),
        v_s=np.array(meta["v_s"], dtype=float),
        values=values,
    )


def write_columns(path, columns: dict[str, np.ndarray], meta: dict | None = None):
    """Generic x/y column file for external plotting."""
    names = list(columns)
    header = _header_lines({"kind": "columns", "columns": names, **(meta or {})})
    arrays = [np.asarray(columns[n], dtype=float) for n in names]
    body = "".join(
        " ".join(f"{a[i]:.12e}" for a in arrays) + "\n" for i in range(arrays[0].size)
    )
    atomic_write_text(path, header + body)


def read_columns(path) -> tuple[dict, dict[str, np.ndarray]]:
    meta, rows = _read_header(path)
    if meta.get("kind") != "columns":
        raise ValidationError(f"{path}: not a column file")
    data = np.array([[float(x) for x in row.split()] for row in rows])
    cols = {name: data[:, i] for i, name in enumerate(meta["columns"])}
    return meta, cols


def write_report(path, records: list[dict]):
    """JSON-lines fit report, one record per fit."""
    body = "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in records)
    atomic_write_text(path, body)


def read_report(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_program(path, program: WaveformProgram):
    doc = {
        "kind": "program",
        "description": program.description,
        "sample_rate_hz": program.sample_rate,
        "settle_fraction": program.settle_fraction,
        "carriers": [
            {"frequency_hz": c.frequency, "amplitude_v": c.amplitude, "row": c.row}
            for c in program.carriers
        ],
        "segments": [
            {
                "duration_s": seg.duration,
                "drives": {name: [d.start, d.end] for name, d in sorted(seg.drives.items())},
                "active": {str(row): list(cell) for row, cell in sorted(seg.active.items())},
            }
            for seg in program.segments
        ],
    }
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_program(path) -> WaveformProgram:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(
                f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from exc
    if doc.get("kind") != "program":
        raise ValidationError(f"{path}: not a program file")
    segments = tuple(
        Segment(
            duration=float(seg["duration_s"]),
            drives={name: Drive(float(se[0]), float(se[1]))
                    for name, se in seg["drives"].items()},
            active={int(row): tuple(cell) for row, cell in seg.get("active", {}).items()},
        )
        for seg in doc["segments"]
    )
    carriers = CarrierSet(tuple(
        Carrier(float(c["frequency_hz"]), float(c["amplitude_v"]), int(c["row"]))
        for c in doc["carriers"]
    ))
    return WaveformProgram(
        segments=segments,
        carriers=carriers,
        sample_rate=float(doc["sample_rate_hz"]),
        settle_fraction=float(doc.get("settle_fraction", 0.01)),
        description=str(doc.get("description", "")),
    )


def write_manifest(path, *, config_hash: str, program: str, seed: int,
                   version: str, outputs: list[str], duration_s: float):
    manifest = {
        "config_hash": config_hash,
        "program": program,
        "seed": seed,
        "tool_version": version,
        "outputs": sorted(outputs),
        "duration_s": duration_s,
    }
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
