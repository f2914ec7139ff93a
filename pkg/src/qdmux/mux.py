"""Waveform programs for addressed readout, their execution, and demultiplexing.

A :class:`WaveformProgram` is an ordered list of segments, each holding the
per-line level (constant or linear ramp) for its duration, plus the carrier
set and a sample cadence.  Builders compile the three addressing schemes:

* ``build_time_mux``  -- one row, word-lines raised one cell at a time;
* ``build_freq_mux``  -- several rows probed in parallel on their carriers;
* ``build_combined``  -- a 2x2 block with a word-line square wave and both
  row carriers active throughout.

``run_experiment`` steps every cell of the chip along the program, computes
the per-row gate loads, and demodulates all carriers into annotated traces.
``demux`` slices traces back into per-device stability maps.

Sampling is per segment: each segment is covered by ``round(duration *
sample_rate)`` equal sub-intervals and lines are evaluated at the interval
midpoints, so every visit of a device lands on an identical ramp grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .cells import (
    CellState,
    MatrixConfig,
    cell_branch_impedance,
    equilibrium_gate_voltage,
    step_cell,
)
from .device import access_resistance, coulomb_current
from .errors import ValidationError
from .rf import Carrier, CarrierSet, NoiseModel, demodulate, reflection_coefficient


@dataclass(frozen=True)
class Drive:
    """Line level over one segment: constant if start == end, else linear."""

    start: float
    end: float

    @classmethod
    def const(cls, level: float) -> "Drive":
        return cls(level, level)

    def value(self, frac):
        return self.start + (self.end - self.start) * frac

    @property
    def is_ramp(self) -> bool:
        return self.start != self.end


@dataclass(frozen=True)
class Segment:
    """Fixed-duration slice of a program with its line drives and address tag.

    ``active`` maps row index -> (row, col) of the cell being read on that
    row during this segment.
    """

    duration: float
    drives: dict[str, Drive]
    active: dict[int, tuple[int, int]] = field(default_factory=dict)

    def __post_init__(self):
        if self.duration <= 0.0:
            raise ValidationError("segment duration must be > 0")


@dataclass(frozen=True)
class WaveformProgram:
    segments: tuple[Segment, ...]
    carriers: CarrierSet
    sample_rate: float = 1e4
    settle_fraction: float = 0.01
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise ValidationError("program needs at least one segment")
        if self.sample_rate <= 0.0:
            raise ValidationError("sample_rate must be > 0")
        if not 0.0 <= self.settle_fraction < 1.0:
            raise ValidationError("settle_fraction must be in [0, 1)")
        min_dur = min(s.duration for s in self.segments)
        if self.sample_rate * min_dur < 10.0:
            raise ValidationError(
                "sample_rate * min(segment duration) must be >= 10 "
                f"(got {self.sample_rate * min_dur:.3g})"
            )

    @property
    def total_duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    def boundaries(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([s.duration for s in self.segments])])

    def line_names(self) -> set[str]:
        names: set[str] = set()
        for seg in self.segments:
            names |= set(seg.drives)
        return names

    def validate_for(self, chip: MatrixConfig):
        unknown = self.line_names() - chip.line_names()
        if unknown:
            raise ValidationError(f"program drives unknown lines: {sorted(unknown)}")
        for carrier in self.carriers:
            if not 1 <= carrier.row <= chip.n_rows:
                raise ValidationError(f"carrier targets unknown row {carrier.row}")
        for seg in self.segments:
            for row, (r, c) in seg.active.items():
                if r != row or not (1 <= r <= chip.n_rows and 1 <= c <= chip.n_cols):
                    raise ValidationError(f"segment addresses invalid cell ({r}, {c})")

    def sampling(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Timestamps, step lengths, segment index, and in-segment fraction.

        The fractional position inside each segment is built locally as
        ``(m + 0.5)/n``, never by subtracting global timestamps, so every
        segment of a given duration samples its ramp on a bit-identical grid.
        """
        bounds = self.boundaries()
        times, dts, seg_idx, fracs = [], [], [], []
        for k, seg in enumerate(self.segments):
            n_k = max(int(round(seg.duration * self.sample_rate)), 1)
            frac_k = (np.arange(n_k) + 0.5) / n_k
            times.append(bounds[k] + frac_k * seg.duration)
            dts.append(np.full(n_k, seg.duration / n_k))
            seg_idx.append(np.full(n_k, k, dtype=int))
            fracs.append(frac_k)
        return (
            np.concatenate(times),
            np.concatenate(dts),
            np.concatenate(seg_idx),
            np.concatenate(fracs),
        )

    def sample_times(self) -> np.ndarray:
        return self.sampling()[0]

    def levels(self, line: str, default: float = 0.0) -> np.ndarray:
        """Line level at every sample (mid-interval ramp evaluation)."""
        _, _, seg_idx, fracs = self.sampling()
        out = np.full(fracs.shape, default, dtype=float)
        for k, seg in enumerate(self.segments):
            sel = seg_idx == k
            drive = seg.drives.get(line)
            if drive is None or not np.any(sel):
                continue
            out[sel] = drive.value(fracs[sel])
        return out

    def with_source_levels(self, v_s: float) -> "WaveformProgram":
        """Copy of the program with every source line held at ``v_s``."""
        new_segments = []
        for seg in self.segments:
            drives = dict(seg.drives)
            for name in drives:
                if name.startswith("V_S"):
                    drives[name] = Drive.const(v_s)
            new_segments.append(replace(seg, drives=drives))
        return replace(self, segments=tuple(new_segments))


@dataclass(frozen=True)
class SegmentWindow:
    """Time window of one segment inside a trace, with its addressed cell."""

    t_start: float
    t_end: float
    active: tuple[int, int] | None


@dataclass(frozen=True)
class Trace:
    """Demodulated samples of one carrier over one program execution."""

    carrier: int
    frequency: float
    row: int
    t: np.ndarray
    v_mw: np.ndarray
    segments: tuple[SegmentWindow, ...]
    source_voltage: float | None = None
    seed_key: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        t = np.asarray(self.t, dtype=float)
        if t.ndim != 1 or t.shape != np.shape(self.v_mw):
            raise ValidationError("trace needs matching 1-d t and v_mw arrays")
        if np.any(np.diff(t) <= 0.0):
            raise ValidationError("trace timestamps must be strictly increasing")
        if not self.segments:
            raise ValidationError("trace needs at least one segment window")
        starts = np.array([w.t_start for w in self.segments])
        ends = np.array([w.t_end for w in self.segments])
        if np.any(ends <= starts) or np.any(starts[1:] < ends[:-1] - 1e-12):
            raise ValidationError("segment windows must be ordered and disjoint")
        # contiguous windows guarantee each sample falls in exactly one
        if np.any(np.abs(starts[1:] - ends[:-1]) > 1e-9 * max(ends[-1], 1.0)):
            raise ValidationError("segment windows must tile the trace without gaps")
        if t.size and (t[0] < starts[0] or t[-1] >= ends[-1]):
            raise ValidationError("samples fall outside the segment windows")

    def segment_mask(self, window: SegmentWindow) -> np.ndarray:
        return (self.t >= window.t_start) & (self.t < window.t_end)

    def with_values(self, v_mw: np.ndarray) -> "Trace":
        return replace(self, v_mw=np.asarray(v_mw, dtype=float))


@dataclass(frozen=True)
class StabilityMap:
    """Per-device map of demodulated voltage over (data-line, source) axes."""

    device: tuple[int, int]
    v_dl: np.ndarray
    v_s: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        v_dl = np.asarray(self.v_dl, dtype=float)
        v_s = np.asarray(self.v_s, dtype=float)
        diffs_dl = np.diff(v_dl)
        diffs_s = np.diff(v_s)
        if v_dl.size > 1 and not (np.all(diffs_dl > 0) or np.all(diffs_dl < 0)):
            raise ValidationError("v_dl axis must be strictly monotone")
        if v_s.size > 1 and not (np.all(diffs_s > 0) or np.all(diffs_s < 0)):
            raise ValidationError("v_s axis must be strictly monotone")
        if np.shape(self.values) != (v_s.size, v_dl.size):
            raise ValidationError("values must be shaped (len(v_s), len(v_dl))")


def _wl_name(col: int) -> str:
    return f"V_WL{col}"


def _dl_name(row: int) -> str:
    return f"V_DL{row}"


def _vs_name(row: int, col: int) -> str:
    return f"V_S{row}{col}"


def build_time_mux(
    chip: MatrixConfig,
    cells: list[tuple[int, int]],
    v_wl_high: float = 1.5,
    v_wl_low: float = 0.5,
    dl_ramp: tuple[float, float, float] = (0.39, 0.56, 25e-3 / 3.0),
    v_s: float = 1e-3,
    amplitude: float = 1.0,
    sample_rate: float = 1e4,
) -> WaveformProgram:
    """Sequential single-row readout: one segment per visited cell.

    During a cell's segment its column word-line sits at ``v_wl_high`` while
    every other word-line is held at ``v_wl_low``, and the row data-line runs
    the same start->end ramp.  One carrier probes the shared row resonator.
    """
    if not cells:
        raise ValidationError("cell list must not be empty")
    rows = {r for r, _ in cells}
    if len(rows) != 1:
        raise ValidationError(f"time multiplexing needs one shared row, got rows {sorted(rows)}")
    if v_wl_high <= v_wl_low:
        raise ValidationError("v_wl_high must exceed v_wl_low")
    row = rows.pop()
    start, end, dwell = dl_ramp
    segments = []
    for r, c in cells:
        chip.check_index(r, c)
        drives = {_wl_name(j): Drive.const(v_wl_low) for j in range(1, chip.n_cols + 1)}
        drives[_wl_name(c)] = Drive.const(v_wl_high)
        drives[_dl_name(row)] = Drive(start, end)
        for _, cc in cells:
            drives[_vs_name(row, cc)] = Drive.const(v_s)
        segments.append(Segment(duration=dwell, drives=drives, active={row: (r, c)}))
    carriers = CarrierSet((Carrier(chip.row_carriers[row - 1], amplitude, row),))
    return WaveformProgram(
        segments=tuple(segments),
        carriers=carriers,
        sample_rate=sample_rate,
        description=f"time-mux row {row} cells {list(cells)}",
    )


def build_freq_mux(
    chip: MatrixConfig,
    rows: list[tuple[int, int, tuple[float, float, float]]],
    v_wl_high: float = 1.5,
    v_wl_low: float = 0.5,
    v_s: float = 1e-3,
    amplitude: float = 1.0,
    sample_rate: float = 1e4,
) -> WaveformProgram:
    """Parallel multi-row readout: one carrier per row, shared time base.

    ``rows`` lists ``(row, col, dl_ramp)``; all ramps must share one duration.
    The word-line of every active column is high for the whole program.
    """
    if not rows:
        raise ValidationError("row list must not be empty")
    row_ids = [r for r, _, _ in rows]
    if len(set(row_ids)) != len(row_ids):
        raise ValidationError(f"duplicate rows in frequency multiplexing: {row_ids}")
    durations = {ramp[2] for _, _, ramp in rows}
    if len(durations) != 1:
        raise ValidationError("all data-line ramps must share one duration")
    duration = durations.pop()

    active_cols = {c for _, c, _ in rows}
    drives = {_wl_name(j): Drive.const(v_wl_low) for j in range(1, chip.n_cols + 1)}
    for c in active_cols:
        drives[_wl_name(c)] = Drive.const(v_wl_high)
    active = {}
    for r, c, (start, end, _) in rows:
        chip.check_index(r, c)
        drives[_dl_name(r)] = Drive(start, end)
        drives[_vs_name(r, c)] = Drive.const(v_s)
        active[r] = (r, c)
    segment = Segment(duration=duration, drives=drives, active=active)
    carriers = CarrierSet(
        tuple(Carrier(chip.row_carriers[r - 1], amplitude, r) for r, _, _ in rows)
    )
    return WaveformProgram(
        segments=(segment,),
        carriers=carriers,
        sample_rate=sample_rate,
        description=f"freq-mux rows {row_ids}",
    )


def build_combined(
    chip: MatrixConfig,
    block: list[list[tuple[int, int]]],
    dwell: float = 25e-3 / 3.0,
    dl_ramps: dict[int, tuple[float, float]] | None = None,
    v_wl_high: float = 1.5,
    v_wl_low: float = 0.5,
    v_s: float = 1e-3,
    amplitude: float = 1.0,
    sample_rate: float = 1e4,
    repeats: int = 2,
) -> WaveformProgram:
    """Time- and frequency-multiplexed readout of a 2x2 cell block.

    The two columns alternate on a word-line square wave (``repeats`` full
    periods); both row carriers stay active the whole time and each row's
    data-line re-runs its ramp every dwell, synchronised to the square wave.
    """
    if len(block) != 2 or any(len(r) != 2 for r in block):
        raise ValidationError("block must be 2 rows x 2 columns of cells")
    (r1c1, r1c2), (r2c1, r2c2) = block
    rows = [r1c1[0], r2c1[0]]
    cols = [r1c1[1], r1c2[1]]
    if r1c2[0] != rows[0] or r2c2[0] != rows[1] or r2c1[1] != cols[0] or r2c2[1] != cols[1]:
        raise ValidationError("block rows/columns are not aligned")
    if rows[0] == rows[1] or cols[0] == cols[1]:
        raise ValidationError("block must span two distinct rows and columns")
    for r, c in (r1c1, r1c2, r2c1, r2c2):
        chip.check_index(r, c)
    if dl_ramps is None:
        dl_ramps = {rows[0]: (0.39, 0.56), rows[1]: (0.39, 0.56)}
    if set(dl_ramps) != set(rows):
        raise ValidationError("dl_ramps must provide exactly the block's two rows")
    if repeats < 1:
        raise ValidationError("repeats must be >= 1")

    segments = []
    for _ in range(repeats):
        for c in cols:
            drives = {_wl_name(j): Drive.const(v_wl_low) for j in range(1, chip.n_cols + 1)}
            drives[_wl_name(c)] = Drive.const(v_wl_high)
            for r in rows:
                drives[_dl_name(r)] = Drive(*dl_ramps[r])
                for cc in cols:
                    drives[_vs_name(r, cc)] = Drive.const(v_s)
            active = {r: (r, c) for r in rows}
            segments.append(Segment(duration=dwell, drives=drives, active=active))
    carriers = CarrierSet(
        tuple(Carrier(chip.row_carriers[r - 1], amplitude, r) for r in rows)
    )
    return WaveformProgram(
        segments=tuple(segments),
        carriers=carriers,
        sample_rate=sample_rate,
        description=f"combined 2x2 block rows {rows} cols {cols}",
    )


def _segment_windows(program: WaveformProgram, row: int) -> tuple[SegmentWindow, ...]:
    bounds = program.boundaries()
    windows = []
    for k, seg in enumerate(program.segments):
        windows.append(
            SegmentWindow(
                t_start=float(bounds[k]),
                t_end=float(bounds[k + 1]),
                active=seg.active.get(row),
            )
        )
    return tuple(windows)


def run_experiment(
    program: WaveformProgram,
    chip: MatrixConfig,
    noise: NoiseModel,
    stream_key: tuple[int, ...] = (),
) -> list[Trace]:
    """Execute a program on the chip and demodulate every carrier.

    Every cell is stepped at the sample cadence with the closed-form
    relaxation update (line levels evaluated mid-sample), the per-row gate
    loads are assembled from the cell branches, and each carrier is
    demodulated against its own row resonator.  Deterministic for a given
    noise seed and ``stream_key``; the chip instance is not modified.
    """
    program.validate_for(chip)
    times, dts, _, _ = program.sampling()

    wl = {j: program.levels(_wl_name(j)) for j in range(1, chip.n_cols + 1)}
    dl = {i: program.levels(_dl_name(i)) for i in range(1, chip.n_rows + 1)}

    # evolve each cell's stored voltage along the program; same closed-form
    # relaxation as step_cell, with the per-sample equilibria precomputed
    v_g_hist: dict[tuple[int, int], np.ndarray] = {}
    for i in range(1, chip.n_rows + 1):
        for j in range(1, chip.n_cols + 1):
            cell = chip.cell(i, j)
            r_acc = access_resistance(cell.access, wl[j] - dl[i])
            v_eq = dl[i] * cell.r_g / (r_acc + cell.r_g)
            tau = cell.c_cell * cell.r_g * r_acc / (cell.r_g + r_acc)
            decay = np.exp(-dts / tau)
            hist = np.empty(times.size)
            v = cell.v_g
            for k in range(times.size):
                v = v_eq[k] + (v - v_eq[k]) * decay[k]
                hist[k] = v
            v_g_hist[(i, j)] = hist

    needed_rows = {c.row for c in program.carriers}
    freq_of_row = {c.row: c.frequency for c in program.carriers}
    row_loads: dict[int, np.ndarray] = {}
    for i in sorted(needed_rows):
        y = np.zeros(times.size, dtype=complex)
        for j in range(1, chip.n_cols + 1):
            cell = chip.cell(i, j)
            z = cell_branch_impedance(
                cell, freq_of_row[i], v_g=v_g_hist[(i, j)], v_wl=wl[j], v_dl=dl[i]
            )
            y += 1.0 / z
        row_loads[i] = 1.0 / y

    resonators = {i: chip.row_resonators[i - 1] for i in needed_rows}
    streams = demodulate(program.carriers, resonators, row_loads, noise, stream_key=stream_key)

    traces = []
    for idx, carrier in enumerate(program.carriers):
        traces.append(
            Trace(
                carrier=idx,
                frequency=carrier.frequency,
                row=carrier.row,
                t=times,
                v_mw=streams[idx],
                segments=_segment_windows(program, carrier.row),
                seed_key=tuple(stream_key),
            )
        )
    return traces


def run_source_sweep(
    chip: MatrixConfig,
    program: WaveformProgram,
    v_s_values,
    noise: NoiseModel,
) -> list[Trace]:
    """Repeat a program while stepping every source line through ``v_s_values``."""
    traces = []
    for n, v_s in enumerate(v_s_values):
        prog = program.with_source_levels(float(v_s))
        for trace in run_experiment(prog, chip, noise, stream_key=(n,)):
            traces.append(replace(trace, source_voltage=float(v_s)))
    return traces


def demux(
    traces: list[Trace],
    program: WaveformProgram,
    v_s_sweep,
) -> list[StabilityMap]:
    """Slice traces into per-device stability maps.

    Samples inside each segment (after the settling dead time) are mapped to
    data-line voltage through the segment's ramp; repetitions over the source
    sweep stack into map rows, and repeated visits to one device within a
    program are averaged.
    """
    v_s_axis = np.asarray(v_s_sweep, dtype=float)
    by_vs: dict[float, list[Trace]] = {}
    for tr in traces:
        if tr.source_voltage is None:
            raise ValidationError("trace lacks its source-sweep annotation")
        by_vs.setdefault(tr.source_voltage, []).append(tr)
    missing = [float(v) for v in v_s_axis if float(v) not in by_vs]
    if missing:
        raise ValidationError(f"no traces for source voltages {missing}")

    _, _, seg_idx, fracs = program.sampling()
    collected: dict[tuple[int, int], dict] = {}
    for iv, v_s in enumerate(v_s_axis):
        for tr in by_vs[float(v_s)]:
            if len(tr.segments) != len(program.segments):
                raise ValidationError("trace annotations do not match the program")
            if tr.v_mw.size != seg_idx.size:
                raise ValidationError("trace sample count does not match the program")
            for k, window in enumerate(tr.segments):
                if window.active is None:
                    continue
                seg = program.segments[k]
                drive = seg.drives.get(_dl_name(tr.row))
                if drive is None or not drive.is_ramp:
                    continue
                sel = seg_idx == k
                frac = fracs[sel]
                keep = frac >= program.settle_fraction
                v_dl = drive.value(frac[keep])
                vals = tr.v_mw[sel][keep]
                slot = collected.setdefault(window.active, {"v_dl": v_dl, "rows": {}})
                if slot["v_dl"].shape != v_dl.shape or not np.array_equal(slot["v_dl"], v_dl):
                    raise ValidationError(
                        f"inconsistent ramp sampling for device {window.active}"
                    )
                slot["rows"].setdefault(iv, []).append(vals)

    maps = []
    for device in sorted(collected):
        slot = collected[device]
        values = np.zeros((v_s_axis.size, slot["v_dl"].size))
        for iv in range(v_s_axis.size):
            chunks = slot["rows"].get(iv)
            if not chunks:
                raise ValidationError(f"device {device} missing sweep step {iv}")
            values[iv] = np.mean(chunks, axis=0)
        maps.append(
            StabilityMap(device=device, v_dl=slot["v_dl"], v_s=v_s_axis, values=values)
        )
    return maps


def static_rf_map(
    chip: MatrixConfig,
    device: tuple[int, int],
    v_dl_axis,
    v_s_axis,
    noise: NoiseModel,
    v_wl_high: float = 1.5,
    v_wl_low: float = 0.5,
    amplitude: float = 1.0,
    stream_key: tuple[int, ...] = (),
) -> StabilityMap:
    """Fully-settled control map of one device, point by point.

    The device's column is held high, every other column low, and the stored
    voltage sits at its divider equilibrium for each data-line value -- the
    reference against which multiplexed readout is compared.
    """
    row, col = device
    chip.check_index(row, col)
    v_dl_axis = np.asarray(v_dl_axis, dtype=float)
    v_s_axis = np.asarray(v_s_axis, dtype=float)
    f_probe = chip.row_carriers[row - 1]
    spec = chip.row_resonators[row - 1]

    y = np.zeros(v_dl_axis.size, dtype=complex)
    for j in range(1, chip.n_cols + 1):
        cell = chip.cell(row, j)
        v_wl = v_wl_high if j == col else v_wl_low
        v_g = np.array(
            [equilibrium_gate_voltage(cell, float(v), v_wl) for v in v_dl_axis]
        )
        z = cell_branch_impedance(
            cell, f_probe, v_g=v_g, v_wl=np.full(v_dl_axis.size, v_wl), v_dl=v_dl_axis
        )
        y += 1.0 / z
    loads = 1.0 / y

    gamma = reflection_coefficient(spec, loads, f_probe)
    line = amplitude * np.abs(gamma)
    values = np.tile(line, (v_s_axis.size, 1))
    if noise.sigma_v > 0.0:
        rng = noise.stream(*stream_key, row, col)
        values = values + rng.normal(0.0, noise.sigma_v, size=values.shape)
    return StabilityMap(device=(row, col), v_dl=v_dl_axis, v_s=v_s_axis, values=values)


def static_dc_map(
    chip: MatrixConfig,
    device: tuple[int, int],
    v_dl_axis,
    v_s_axis,
    v_wl: float = 1.5,
) -> StabilityMap:
    """DC transport diamond map of one device with its access transistor on."""
    row, col = device
    chip.check_index(row, col)
    cell = chip.cell(row, col)
    v_dl_axis = np.asarray(v_dl_axis, dtype=float)
    v_s_axis = np.asarray(v_s_axis, dtype=float)
    v_g = np.array([equilibrium_gate_voltage(cell, float(v), v_wl) for v in v_dl_axis])
    current = coulomb_current(
        cell.device, v_g[np.newaxis, :], v_s_axis[:, np.newaxis]
    )
    return StabilityMap(device=(row, col), v_dl=v_dl_axis, v_s=v_s_axis, values=current)


@dataclass(frozen=True)
class DecayRecord:
    """Current-versus-time record of a charge / hold / discharge sequence."""

    t: np.ndarray
    i_s: np.ndarray
    v_g: np.ndarray
    t_release: float


def run_retention(
    cell: CellState,
    v_wl_high: float = 1.49,
    v_wl_low: float = 0.5,
    v_dl: float = 0.8,
    v_s: float = 1e-3,
    t_charge: float = 0.02,
    t_hold: float = 0.25,
    sample_rate: float = 2e4,
) -> DecayRecord:
    """Charge the storage node, drop the word-line, and record the decay.

    While the stored voltage relaxes through the charge transitions the DC
    source current shows bursts; their timing against the static peak
    positions measures the retention time constant.
    """
    dt = 1.0 / sample_rate
    n_charge = int(round(t_charge * sample_rate))
    n_hold = int(round(t_hold * sample_rate))
    n = n_charge + n_hold
    t = (np.arange(n) + 0.5) * dt
    v_g = np.empty(n)
    i_s = np.empty(n)
    state = cell
    for k in range(n):
        v_wl = v_wl_high if k < n_charge else v_wl_low
        state = step_cell(state, v_dl, v_wl, dt)
        v_g[k] = state.v_g
        i_s[k] = coulomb_current(state.device, state.v_g, v_s)
    return DecayRecord(t=t, i_s=i_s, v_g=v_g, t_release=n_charge * dt)


def static_dc_sweep(
    cell: CellState,
    v_dl_axis,
    v_wl: float = 1.49,
    v_s: float = 1e-3,
) -> np.ndarray:
    """Fully-settled source current versus data-line voltage for one cell."""
    v_dl_axis = np.asarray(v_dl_axis, dtype=float)
    v_g = np.array([equilibrium_gate_voltage(cell, float(v), v_wl) for v in v_dl_axis])
    return coulomb_current(cell.device, v_g, np.full(v_dl_axis.size, v_s))
