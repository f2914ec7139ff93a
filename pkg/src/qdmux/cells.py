"""Storage-cell dynamics and the row/column wiring of the readout matrix.

Each cell is an access transistor feeding a storage node (hold capacitor plus
QD gate) that leaks through the QD gate resistance.  Under constant line
biases the stored gate voltage relaxes exponentially toward the resistive
divider equilibrium with time constant
``tau = c_cell * r_g * r_acc / (r_g + r_acc)``, and the update used here is
the closed-form exponential, not an integrator.

An N x N matrix shares word-lines per column and a data-line plus resonator
per row, so N^2 devices need only 2*sqrt(N^2) control lines and sqrt(N^2)
resonators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .device import (
    AccessTransistorParams,
    DeviceParams,
    access_capacitance,
    access_resistance,
    dispersive_capacitance,
)
from .rf import ResonatorSpec


@dataclass(frozen=True)
class CellState:
    """One access-transistor / storage-capacitor / QD cell.

    ``v_g`` is the voltage held on the storage node; ``v_wl`` and ``v_dl``
    record the line biases the cell currently sees (they determine the access
    resistance used for both relaxation and the RF branch impedance).
    """

    device: DeviceParams
    access: AccessTransistorParams
    v_g: float = 0.0
    c_cell: float = 2e-13
    r_g: float = 1e12
    v_wl: float = 0.0
    v_dl: float = 0.0

    def __post_init__(self):
        if self.c_cell <= 0.0:
            raise ValueError("c_cell must be > 0")
        if self.r_g <= 0.0:
            raise ValueError("r_g must be > 0")
        if not math.isfinite(self.v_g):
            raise ValueError("v_g must be finite")

    @property
    def v_overdrive(self) -> float:
        return self.v_wl - self.v_dl


def equilibrium_gate_voltage(cell: CellState, v_dl: float, v_wl: float) -> float:
    """Divider equilibrium v_dl * r_g / (r_acc + r_g) of the storage node."""
    r_acc = access_resistance(cell.access, v_wl - v_dl)
    return v_dl * cell.r_g / (r_acc + cell.r_g)


def retention_time(cell: CellState, v_wl: float, v_dl: float) -> float:
    """Storage-node time constant c_cell * (r_g parallel r_acc) at this bias."""
    r_acc = access_resistance(cell.access, v_wl - v_dl)
    return cell.c_cell * cell.r_g * r_acc / (cell.r_g + r_acc)


def step_cell(cell: CellState, v_dl: float, v_wl: float, dt: float) -> CellState:
    """Advance the stored voltage by ``dt`` under constant line biases.

    Exact exponential relaxation toward the divider equilibrium; composing
    steps is equivalent to one long step.  Line biases are frozen into the
    returned state.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    v_eq = equilibrium_gate_voltage(cell, v_dl, v_wl)
    tau = retention_time(cell, v_wl, v_dl)
    decay = math.exp(-dt / tau)
    v_new = v_eq + (cell.v_g - v_eq) * decay
    return replace(cell, v_g=v_new, v_wl=v_wl, v_dl=v_dl)


def lines_required(n_devices: int) -> tuple[int, int]:
    """Control lines and resonators needed for a square matrix of devices.

    An N-device matrix arranged sqrt(N) x sqrt(N) needs 2*sqrt(N) DC lines
    (word plus data) and sqrt(N) resonators.
    """
    if n_devices < 1 or not isinstance(n_devices, (int, np.integer)):
        raise ValueError("n_devices must be a positive integer")
    root = math.isqrt(int(n_devices))
    if root * root != n_devices:
        raise ValueError(f"n_devices={n_devices} is not a perfect square")
    return 2 * root, root


def cell_branch_impedance(cell: CellState, f_probe, v_g=None, v_wl=None, v_dl=None):
    """Complex impedance of one cell branch as seen from the row line.

    The access transistor is a parallel RC (channel resistance with the
    depletion capacitance) in series with the QD gate node, itself the gate
    leak in parallel with the geometric-plus-dispersive gate capacitance.
    Arguments ``v_g``/``v_wl``/``v_dl`` override the stored values, and may be
    arrays for vectorised evaluation along a waveform.
    """
    v_g = cell.v_g if v_g is None else np.asarray(v_g, dtype=float)
    v_wl = cell.v_wl if v_wl is None else np.asarray(v_wl, dtype=float)
    v_dl = cell.v_dl if v_dl is None else np.asarray(v_dl, dtype=float)
    w = 2.0 * np.pi * f_probe
    v_od = v_wl - v_dl
    r_acc = access_resistance(cell.access, v_od)
    c_dep = access_capacitance(cell.access, v_od)
    y_acc = 1.0 / r_acc + 1j * w * c_dep
    c_node = cell.device.c_gate + dispersive_capacitance(cell.device, v_g, f_probe)
    y_node = 1.0 / cell.r_g + 1j * w * c_node
    return 1.0 / y_acc + 1.0 / y_node


@dataclass(frozen=True)
class MatrixConfig:
    """Complete N-rows x N-cols cell grid with one resonator per row."""

    n_rows: int
    n_cols: int
    cells: tuple[tuple[CellState, ...], ...]
    row_resonators: tuple[ResonatorSpec, ...]
    row_carriers: tuple[float, ...]
    v_s: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if self.n_rows < 1 or self.n_cols < 1:
            raise ValueError("matrix dimensions must be >= 1")
        if len(self.cells) != self.n_rows or any(len(r) != self.n_cols for r in self.cells):
            raise ValueError("cell grid incomplete")
        if len(self.row_resonators) != self.n_rows:
            raise ValueError("need exactly one resonator per row")
        if len(self.row_carriers) != self.n_rows:
            raise ValueError("need exactly one carrier frequency per row")
        if len(self.v_s) != self.n_rows or any(len(r) != self.n_cols for r in self.v_s):
            raise ValueError("v_s grid incomplete")

    def cell(self, row: int, col: int) -> CellState:
        self.check_index(row, col)
        return self.cells[row - 1][col - 1]

    def with_cell(self, row: int, col: int, cell: CellState) -> "MatrixConfig":
        self.check_index(row, col)
        grid = [list(r) for r in self.cells]
        grid[row - 1][col - 1] = cell
        return replace(self, cells=tuple(tuple(r) for r in grid))

    def check_index(self, row: int, col: int):
        if not (1 <= row <= self.n_rows and 1 <= col <= self.n_cols):
            raise IndexError(f"cell ({row}, {col}) outside {self.n_rows}x{self.n_cols} matrix")

    def word_line_names(self) -> list[str]:
        return [f"V_WL{j}" for j in range(1, self.n_cols + 1)]

    def data_line_names(self) -> list[str]:
        return [f"V_DL{i}" for i in range(1, self.n_rows + 1)]

    def source_line_names(self) -> list[str]:
        return [
            f"V_S{i}{j}"
            for i in range(1, self.n_rows + 1)
            for j in range(1, self.n_cols + 1)
        ]

    def line_names(self) -> set[str]:
        return set(self.word_line_names()) | set(self.data_line_names()) | set(
            self.source_line_names()
        )


def matrix_gate_load(m: MatrixConfig, row: int, f_probe: float) -> complex:
    """Row load: parallel combination of every cell branch on the row."""
    if not 1 <= row <= m.n_rows:
        raise IndexError(f"row {row} outside 1..{m.n_rows}")
    y = 0.0 + 0.0j
    for cell in m.cells[row - 1]:
        y = y + 1.0 / cell_branch_impedance(cell, f_probe)
    return 1.0 / y
