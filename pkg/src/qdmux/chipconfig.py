"""Chip configuration: parsing, validation, defaults, and matrix construction.

The configuration is a nested JSON document (human-editable, diff-friendly).
Unknown keys are rejected at every level with the offending path in the
message.  ``build_matrix`` turns a validated configuration into a fully
calibrated :class:`~qdmux.cells.MatrixConfig`; resonators are produced by
:func:`~qdmux.rf.calibrate_resonator` against the configured on-state load,
not read from a component table.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass

import numpy as np
from scipy.constants import e as Q_E
from scipy.optimize import brentq

from .cells import CellState, MatrixConfig, cell_branch_impedance, equilibrium_gate_voltage
from .device import (
    AccessTransistorParams,
    ChargeTransition,
    DeviceParams,
    default_access_params,
)
from .errors import ValidationError
from .rf import NoiseModel, ResonatorSpec, calibrate_resonator, dip_metrics


DEFAULT_CONFIG: dict = {
    "matrix": {"n_rows": 3, "n_cols": 3},
    "seed": 7,
    "noise": {"sigma_v": 2e-4},
    "device": {
        "e_c_mev": 21.42,
        "alpha_s": 0.5,
        "g_max": 1e-6,
        "temperature_k": 0.05,
        "c_gate_f": 2e-15,
        "transitions": [
            # two source-only transitions: RF-visible, no DC current
            {"v_peak": 0.346, "alpha": 0.8, "gamma_s_hz": 48.3e9, "gamma_d_hz": 0.0},
            {"v_peak": 0.373, "alpha": 0.8, "gamma_s_hz": 30.0e9, "gamma_d_hz": 0.0},
            {"v_peak": 0.400000, "alpha": 0.8, "gamma_s_hz": 4e11, "gamma_d_hz": 5e10, "c_q_max_f": 1.5e-16},
            {"v_peak": 0.426775, "alpha": 0.8, "gamma_s_hz": 4e11, "gamma_d_hz": 5e10, "c_q_max_f": 1.5e-16},
            {"v_peak": 0.453550, "alpha": 0.8, "gamma_s_hz": 4e11, "gamma_d_hz": 5e10, "c_q_max_f": 1.5e-16},
            {"v_peak": 0.480325, "alpha": 0.8, "gamma_s_hz": 4e11, "gamma_d_hz": 5e10, "c_q_max_f": 1.5e-16},
            {"v_peak": 0.507100, "alpha": 0.8, "gamma_s_hz": 4e11, "gamma_d_hz": 5e10, "c_q_max_f": 1.5e-16},
        ],
    },
    "access": {
        "r_on_ohm": 50.0,
        "r_off_ohm": 1e15,
        "c_dep_max_f": 2e-14,
    },
    "cell": {"c_cell_f": 2e-13, "r_g_ohm": 1e12, "v_g": 0.0},
    "v_s": 1e-3,
    "resonators": [
        {"f_ghz": 6.872, "q": 45.0},
        {"f_ghz": 7.420, "q": 45.0},
        {"f_ghz": 7.951, "q": 45.0},
    ],
    "warm_resonance_ghz": [6.810, 7.374, 7.941],
    "readout": {
        "v_wl_high": 1.5,
        "v_wl_low": 0.5,
        "dl_start": 0.39,
        "dl_end": 0.56,
        "dwell_s": 25e-3 / 3.0,
        "sample_rate_hz": 5e4,
        "amplitude_v": 1.0,
        "v_s_sweep": {"start": -5e-3, "stop": 5e-3, "points": 11},
    },
    "retention": {
        "v_wl_high": 1.49,
        "v_wl_low": 0.5,
        "v_dl": 0.8,
        "v_s": 1e-3,
        "t_charge_s": 0.02,
        "t_hold_s": 0.25,
        "sample_rate_hz": 2e4,
        "n_peaks": 4,
    },
    "cell_overrides": {},
}

_SCHEMA_KEYS = {
    "": set(DEFAULT_CONFIG),
    "matrix": {"n_rows", "n_cols"},
    "noise": {"sigma_v"},
    "device": {"e_c_mev", "alpha_s", "g_max", "temperature_k", "c_gate_f", "transitions"},
    "device.transitions[]": {"v_peak", "alpha", "gamma_s_hz", "gamma_d_hz", "c_q_max_f"},
    "access": {"r_on_ohm", "r_off_ohm", "c_dep_max_f", "v_th", "subthreshold_swing",
               "v_forbidden_lo", "v_forbidden_hi"},
    "cell": {"c_cell_f", "r_g_ohm", "v_g"},
    "resonators[]": {"f_ghz", "q"},
    "readout": {"v_wl_high", "v_wl_low", "dl_start", "dl_end", "dwell_s",
                "sample_rate_hz", "amplitude_v", "v_s_sweep"},
    "readout.v_s_sweep": {"start", "stop", "points"},
    "retention": {"v_wl_high", "v_wl_low", "v_dl", "v_s", "t_charge_s", "t_hold_s",
                  "sample_rate_hz", "n_peaks"},
    "cell_overrides{}": {"device", "access", "cell", "v_s"},
}


def _check_keys(block: dict, allowed: set, path: str):
    if not isinstance(block, dict):
        raise ValidationError(f"config{path or ' root'}: expected an object")
    unknown = set(block) - allowed
    if unknown:
        raise ValidationError(f"config{path}: unknown keys {sorted(unknown)}")


def _validated(raw: dict) -> dict:
    _check_keys(raw, _SCHEMA_KEYS[""], "")
    merged = copy.deepcopy(DEFAULT_CONFIG)
    for key, value in raw.items():
        if key in ("matrix", "noise", "access", "cell", "readout", "retention"):
            _check_keys(value, _SCHEMA_KEYS[key], f".{key}")
            if key == "readout" and "v_s_sweep" in value:
                _check_keys(value["v_s_sweep"], _SCHEMA_KEYS["readout.v_s_sweep"], ".readout.v_s_sweep")
            merged[key].update(copy.deepcopy(value))
        elif key == "device":
            _check_keys(value, _SCHEMA_KEYS["device"], ".device")
            for i, tr in enumerate(value.get("transitions", [])):
                _check_keys(tr, _SCHEMA_KEYS["device.transitions[]"], f".device.transitions[{i}]")
            merged["device"].update(copy.deepcopy(value))
        elif key == "resonators":
            for i, res in enumerate(value):
                _check_keys(res, _SCHEMA_KEYS["resonators[]"], f".resonators[{i}]")
            merged["resonators"] = copy.deepcopy(value)
        elif key == "cell_overrides":
            for addr, override in value.items():
                _check_keys(override, _SCHEMA_KEYS["cell_overrides{}"], f".cell_overrides[{addr}]")
                for sub in ("device", "access", "cell"):
                    if sub in override:
                        schema = _SCHEMA_KEYS[sub if sub != "device" else "device"]
                        _check_keys(override[sub], schema, f".cell_overrides[{addr}].{sub}")
            merged["cell_overrides"] = copy.deepcopy(value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


@dataclass(frozen=True)
class ChipConfig:
    """Validated configuration document."""

    data: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "ChipConfig":
        return cls(data=_validated(raw))

    @classmethod
    def from_file(cls, path) -> "ChipConfig":
        with open(path) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(
                    f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
                ) from exc
        return cls.from_dict(raw)

    @classmethod
    def default(cls) -> "ChipConfig":
        return cls(data=copy.deepcopy(DEFAULT_CONFIG))

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True)

    def digest(self) -> str:
        canon = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def readout(self) -> dict:
        return self.data["readout"]

    @property
    def retention(self) -> dict:
        return self.data["retention"]

    def noise_model(self, seed: int | None = None) -> NoiseModel:
        return NoiseModel(
            sigma_v=float(self.data["noise"]["sigma_v"]),
            seed=self.seed if seed is None else int(seed),
        )

    def v_s_sweep(self) -> np.ndarray:
        sw = self.readout["v_s_sweep"]
        return np.linspace(float(sw["start"]), float(sw["stop"]), int(sw["points"]))


def _device_from(block: dict) -> DeviceParams:
    transitions = [
        ChargeTransition(
            v_peak=float(tr["v_peak"]),
            alpha=float(tr.get("alpha", 0.8)),
            gamma_s=float(tr.get("gamma_s_hz", 0.0)),
            gamma_d=float(tr.get("gamma_d_hz", 0.0)),
            c_q_max=None if tr.get("c_q_max_f") is None else float(tr["c_q_max_f"]),
        )
        for tr in block["transitions"]
    ]
    return DeviceParams(
        transitions=tuple(transitions),
        e_c=float(block["e_c_mev"]) * 1e-3 * Q_E,
        alpha_s=float(block["alpha_s"]),
        g_max=float(block["g_max"]),
        temperature=float(block["temperature_k"]),
        c_gate=float(block["c_gate_f"]),
    )


def _access_from(block: dict) -> AccessTransistorParams:
    explicit = {"v_th", "subthreshold_swing", "v_forbidden_lo", "v_forbidden_hi"}
    if explicit & set(block):
        missing = explicit - set(block)
        if missing:
            raise ValidationError(
                f"access block with explicit thresholds must give all of {sorted(explicit)}"
            )
        return AccessTransistorParams(
            v_th=float(block["v_th"]),
            r_on=float(block["r_on_ohm"]),
            r_off=float(block["r_off_ohm"]),
            subthreshold_swing=float(block["subthreshold_swing"]),
            c_dep_max=float(block["c_dep_max_f"]),
            v_forbidden_lo=float(block["v_forbidden_lo"]),
            v_forbidden_hi=float(block["v_forbidden_hi"]),
        )
    return default_access_params(
        r_on=float(block["r_on_ohm"]),
        r_off=float(block["r_off_ohm"]),
        c_dep_max=float(block["c_dep_max_f"]),
    )


def _parse_address(addr: str, n_rows: int, n_cols: int) -> tuple[int, int]:
    try:
        row_s, col_s = addr.split(",")
        row, col = int(row_s), int(col_s)
    except ValueError as exc:
        raise ValidationError(f"cell_overrides key {addr!r} is not 'row,col'") from exc
    if not (1 <= row <= n_rows and 1 <= col <= n_cols):
        raise ValidationError(f"cell_overrides key {addr!r} outside the matrix")
    return row, col


def calibration_load(
    cfg: ChipConfig, cell: CellState, n_cols: int, f_probe: float
) -> complex:
    """Row load with one cell on in deep blockade, the rest off.

    The on-state reference sits at the data-line value that minimises the
    dispersive capacitance inside the readout window, so operating-point
    capacitance peaks move the dip away from its calibrated centre in one
    direction only.
    """
    from .device import dispersive_capacitance

    ro = cfg.readout
    grid = np.linspace(float(ro["dl_start"]), float(ro["dl_end"]), 2001)
    v_dl = float(grid[int(np.argmin(dispersive_capacitance(cell.device, grid, f_probe)))])
    v_on = float(ro["v_wl_high"])
    v_off = float(ro["v_wl_low"])
    on = CellState(
        device=cell.device, access=cell.access, c_cell=cell.c_cell, r_g=cell.r_g,
        v_g=equilibrium_gate_voltage(cell, v_dl, v_on), v_wl=v_on, v_dl=v_dl,
    )
    off = CellState(
        device=cell.device, access=cell.access, c_cell=cell.c_cell, r_g=cell.r_g,
        v_g=equilibrium_gate_voltage(cell, v_dl, v_off), v_wl=v_off, v_dl=v_dl,
    )
    y = 1.0 / cell_branch_impedance(on, f_probe)
    y += (n_cols - 1) / cell_branch_impedance(off, f_probe)
    return 1.0 / y


def build_matrix(cfg: ChipConfig) -> MatrixConfig:
    """Construct and calibrate the cell matrix described by the configuration."""
    n_rows = int(cfg.data["matrix"]["n_rows"])
    n_cols = int(cfg.data["matrix"]["n_cols"])
    resonator_targets = cfg.data["resonators"]
    if len(resonator_targets) != n_rows:
        raise ValidationError(
            f"need one resonator target per row ({n_rows}), got {len(resonator_targets)}"
        )

    device = _device_from(cfg.data["device"])
    access = _access_from(cfg.data["access"])
    cell_block = cfg.data["cell"]
    base = CellState(
        device=device,
        access=access,
        v_g=float(cell_block["v_g"]),
        c_cell=float(cell_block["c_cell_f"]),
        r_g=float(cell_block["r_g_ohm"]),
    )
    v_s_default = float(cfg.data["v_s"])

    grid = [[base for _ in range(n_cols)] for _ in range(n_rows)]
    v_s = [[v_s_default for _ in range(n_cols)] for _ in range(n_rows)]
    for addr, override in cfg.data["cell_overrides"].items():
        row, col = _parse_address(addr, n_rows, n_cols)
        dev_block = copy.deepcopy(cfg.data["device"])
        dev_block.update(override.get("device", {}))
        acc_block = copy.deepcopy(cfg.data["access"])
        acc_block.update(override.get("access", {}))
        c_block = copy.deepcopy(cell_block)
        c_block.update(override.get("cell", {}))
        grid[row - 1][col - 1] = CellState(
            device=_device_from(dev_block),
            access=_access_from(acc_block),
            v_g=float(c_block["v_g"]),
            c_cell=float(c_block["c_cell_f"]),
            r_g=float(c_block["r_g_ohm"]),
        )
        if "v_s" in override:
            v_s[row - 1][col - 1] = float(override["v_s"])

    carriers = []
    specs = []
    for i, target in enumerate(resonator_targets):
        f0 = float(target["f_ghz"]) * 1e9
        q0 = float(target["q"])
        z_on = calibration_load(cfg, grid[i][0], n_cols, f0)
        specs.append(calibrate_resonator(f0, q0, z_on))
        carriers.append(f0)

    return MatrixConfig(
        n_rows=n_rows,
        n_cols=n_cols,
        cells=tuple(tuple(row) for row in grid),
        row_resonators=tuple(specs),
        row_carriers=tuple(carriers),
        v_s=tuple(tuple(row) for row in v_s),
    )


def warm_resonator(
    spec: ResonatorSpec, f_cold: float, f_warm: float, z_load: complex
) -> tuple[ResonatorSpec, float]:
    """Room-temperature variant of a calibrated resonator.

    The cool-down frequency shift is modelled as a fractional change of the
    load-side shunt capacitance; the fraction is solved so the warm dip sits
    at ``f_warm``.  Returns the shifted spec and the applied fraction.
    """
    if f_warm >= f_cold:
        lo, hi = -0.5, 0.0
    else:
        lo, hi = 0.0, 4.0

    def dip_offset(fraction: float) -> float:
        shifted = ResonatorSpec(
            c_s=spec.c_s, l=spec.l, c_p=spec.c_p * (1.0 + fraction),
            r_loss=spec.r_loss, z0=spec.z0,
        )
        f_res, _, _ = dip_metrics(shifted, z_load, f_cold, rel_span=0.2, points=4001)
        return f_res - f_warm

    fraction = brentq(dip_offset, lo, hi, xtol=1e-12, rtol=1e-12)
    shifted = ResonatorSpec(
        c_s=spec.c_s, l=spec.l, c_p=spec.c_p * (1.0 + fraction),
        r_loss=spec.r_loss, z0=spec.z0,
    )
    return shifted, float(fraction)
