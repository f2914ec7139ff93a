import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdmux import (
    CellState,
    MatrixConfig,
    ValidationError,
    cell_branch_impedance,
    default_access_params,
    dispersive_capacitance,
    equilibrium_gate_voltage,
    lines_required,
    matrix_gate_load,
    retention_time,
    step_cell,
)
from qdmux.device import access_capacitance, access_resistance
from conftest import make_device
from oracles import discharge_voltage


class TestEquilibrium:
    def test_fully_on_divider_limit(self, cell):
        v_eq = equilibrium_gate_voltage(cell, 0.5, 2.0)
        assert v_eq == pytest.approx(0.5, rel=1e-9)

    def test_symmetric_divider_at_decoupling_onset(self, cell):
        v_eq = equilibrium_gate_voltage(cell, 0.5, 0.5 + 0.277)
        assert v_eq == pytest.approx(0.25, rel=1e-9)


class TestStepCell:
    def test_long_hold_reaches_equilibrium(self, cell):
        v_eq = equilibrium_gate_voltage(cell, 0.8, 1.49)
        stepped = step_cell(cell, 0.8, 1.49, 1.0)
        assert stepped.v_g == pytest.approx(v_eq, abs=1e-15)

    def test_rejects_non_positive_dt(self, cell):
        with pytest.raises(ValueError):
            step_cell(cell, 0.8, 1.49, 0.0)
        with pytest.raises(ValueError):
            step_cell(cell, 0.8, 1.49, -1e-3)

    def test_discharge_matches_closed_form(self, cell):
        # charge fully, then watch the stored node relax under a low word-line
        charged = step_cell(cell, 0.8, 1.49, 1.0)
        assert charged.v_g == pytest.approx(0.8, abs=1e-9)
        r_acc = access_resistance(cell.access, 0.5 - 0.8)
        times = np.linspace(1e-4, 0.5, 400)
        expected = discharge_voltage(times, 0.8, r_acc, cell.r_g, cell.c_cell)
        state = charged
        t_prev = 0.0
        for t_k, want in zip(times, expected):
            state = step_cell(state, 0.8, 0.5, t_k - t_prev)
            t_prev = t_k
            assert state.v_g == pytest.approx(want, abs=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(
        dt1=st.floats(1e-6, 0.3),
        dt2=st.floats(1e-6, 0.3),
        v_dl=st.floats(0.0, 1.0),
        v_wl=st.floats(0.0, 1.6),
        v_g0=st.floats(0.0, 1.0),
    )
    def test_step_composability(self, cell, dt1, dt2, v_dl, v_wl, v_g0):
        start = CellState(device=cell.device, access=cell.access, v_g=v_g0,
                          c_cell=cell.c_cell, r_g=cell.r_g)
        two = step_cell(step_cell(start, v_dl, v_wl, dt1), v_dl, v_wl, dt2)
        one = step_cell(start, v_dl, v_wl, dt1 + dt2)
        assert two.v_g == pytest.approx(one.v_g, rel=1e-12, abs=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(
        dt=st.floats(1e-6, 1.0),
        v_dl=st.floats(-1.0, 1.0),
        v_wl=st.floats(0.0, 1.6),
        v_g0=st.floats(-1.0, 1.0),
    )
    def test_voltage_stays_in_hull(self, cell, dt, v_dl, v_wl, v_g0):
        start = CellState(device=cell.device, access=cell.access, v_g=v_g0,
                          c_cell=cell.c_cell, r_g=cell.r_g)
        lo = min(v_g0, v_dl, 0.0) - 1e-12
        hi = max(v_g0, v_dl, 0.0) + 1e-12
        assert lo <= step_cell(start, v_dl, v_wl, dt).v_g <= hi


class TestRetentionTime:
    def test_hardwired_gate_limit(self, device):
        access = default_access_params(r_on=1e-3, r_off=1e15)
        cell = CellState(device=device, access=access)
        assert retention_time(cell, 2.0, 0.0) == pytest.approx(cell.c_cell * 1e-3, rel=1e-6)

    def test_parallel_combination_at_matched_resistances(self, cell):
        tau = retention_time(cell, 0.5 + 0.277, 0.5)
        assert tau == pytest.approx(cell.c_cell * cell.r_g / 2, rel=1e-9)

    def test_measured_cell_anchor(self, cell):
        tau = retention_time(cell, 0.5, 0.8)
        assert 0.19 <= tau <= 0.215


class TestLinesRequired:
    @pytest.mark.parametrize("n,expect", [(9, (6, 3)), (1, (2, 1)), (1024, (64, 32)),
                                          (4, (4, 2)), (16, (8, 4))])
    def test_square_counts(self, n, expect):
        assert lines_required(n) == expect

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            lines_required(8)
        with pytest.raises(ValueError):
            lines_required(0)

    @settings(max_examples=40, deadline=None)
    @given(root=st.integers(1, 10_000))
    def test_matches_integer_arithmetic(self, root):
        lines, resonators = lines_required(root * root)
        assert lines == 2 * root
        assert resonators == root

    def test_line_share_per_device_shrinks(self):
        ratios = [lines_required(k * k)[0] / (k * k) for k in range(1, 40)]
        assert all(b < a for a, b in zip(ratios, ratios[1:]))


class TestBranchAndLoad:
    def test_single_branch_matches_hand_built_network(self, cell):
        f = 6.9e9
        w = 2 * math.pi * f
        state = CellState(device=cell.device, access=cell.access, v_g=0.4267,
                          c_cell=cell.c_cell, r_g=cell.r_g, v_wl=1.5, v_dl=0.45)
        got = cell_branch_impedance(state, f)
        od = 1.5 - 0.45
        z_acc = 1.0 / (1.0 / access_resistance(cell.access, od)
                       + 1j * w * access_capacitance(cell.access, od))
        c_node = cell.device.c_gate + dispersive_capacitance(cell.device, 0.4267, f)
        z_node = 1.0 / (1.0 / cell.r_g + 1j * w * c_node)
        assert got == pytest.approx(z_acc + z_node, rel=1e-12)

    def test_off_row_is_high_impedance(self, chip):
        f = chip.row_carriers[0]
        off_chip = chip
        for j in range(1, 4):
            c = chip.cell(1, j)
            off_chip = off_chip.with_cell(1, j, CellState(
                device=c.device, access=c.access, v_g=0.0, c_cell=c.c_cell,
                r_g=c.r_g, v_wl=0.0, v_dl=0.45))
        z = matrix_gate_load(off_chip, 1, f)
        assert abs(z) > 1e12

    def test_parallel_composition_of_two_on_cells(self, chip):
        f = chip.row_carriers[0]
        base = chip.cell(1, 1)

        def with_states(states):
            out = chip
            for j, (v_wl, v_g) in enumerate(states, start=1):
                out = out.with_cell(1, j, CellState(
                    device=base.device, access=base.access, v_g=v_g,
                    c_cell=base.c_cell, r_g=base.r_g, v_wl=v_wl, v_dl=0.45))
            return out

        on1 = with_states([(1.5, 0.40), (0.5, 0.0), (0.5, 0.0)])
        on2 = with_states([(0.5, 0.0), (1.5, 0.4267), (0.5, 0.0)])
        both = with_states([(1.5, 0.40), (1.5, 0.4267), (0.5, 0.0)])
        z1 = matrix_gate_load(on1, 1, f)
        z2 = matrix_gate_load(on2, 1, f)
        z_b = matrix_gate_load(both, 1, f)
        off = chip.cell(1, 3)
        z_off = cell_branch_impedance(CellState(
            device=base.device, access=base.access, v_g=0.0, c_cell=base.c_cell,
            r_g=base.r_g, v_wl=0.5, v_dl=0.45), f)
        # combine the two single-on loads, removing the double-counted off branches
        y_expected = 1 / z1 + 1 / z2 - 3 / z_off + 1 / z_off
        assert z_b == pytest.approx(1 / y_expected, rel=1e-9)

    def test_peaked_cell_shifts_the_load(self, chip):
        f = chip.row_carriers[0]
        base = chip.cell(1, 1)

        def load_at(v_g):
            state = CellState(device=base.device, access=base.access, v_g=v_g,
                              c_cell=base.c_cell, r_g=base.r_g, v_wl=1.5, v_dl=v_g)
            return matrix_gate_load(chip.with_cell(1, 1, state), 1, f)

        at_peak = load_at(0.40)
        off_peak = load_at(0.40 + 0.0134)
        assert abs(at_peak - off_peak) > 100.0


class TestMatrixConfig:
    def test_incomplete_grid_rejected(self, chip):
        with pytest.raises(ValueError):
            MatrixConfig(
                n_rows=2, n_cols=2,
                cells=(tuple([chip.cell(1, 1)]),),
                row_resonators=chip.row_resonators[:2],
                row_carriers=chip.row_carriers[:2],
                v_s=((0.0, 0.0), (0.0, 0.0)),
            )

    def test_resonator_per_row_enforced(self, chip):
        with pytest.raises(ValueError):
            MatrixConfig(
                n_rows=3, n_cols=3,
                cells=chip.cells,
                row_resonators=chip.row_resonators[:2],
                row_carriers=chip.row_carriers,
                v_s=chip.v_s,
            )

    def test_line_names_cover_matrix(self, chip):
        names = chip.line_names()
        assert "V_WL1" in names and "V_DL3" in names and "V_S23" in names
        assert len(names) == 3 + 3 + 9
