import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.constants import e as Q_E, h as PLANCK_H
from scipy.integrate import quad

from qdmux import (
    AccessTransistorParams,
    BiasRegion,
    ChargeTransition,
    DeviceParams,
    access_capacitance,
    access_resistance,
    bias_region,
    coulomb_current,
    default_access_params,
    dispersive_capacitance,
)
from conftest import E_C_DEFAULT, SPACING, make_device
from oracles import rate_equation_mask


class TestChargeTransition:
    def test_default_c_q_is_lifetime_broadened_scale(self):
        t = ChargeTransition(0.4, alpha=0.8, gamma_s=48.3e9, gamma_d=0.0)
        assert t.c_q_max == pytest.approx((Q_E * 0.8) ** 2 / (2 * PLANCK_H * 48.3e9))

    def test_invalid_alpha_rejected(self):
        with pytest.raises(ValueError):
            ChargeTransition(0.4, alpha=1.5, gamma_s=1e9)

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            ChargeTransition(0.4, gamma_s=-1.0)


class TestDeviceParams:
    def test_unsorted_transitions_rejected(self):
        with pytest.raises(ValueError, match="ascending"):
            DeviceParams(
                transitions=(ChargeTransition(0.5), ChargeTransition(0.4)),
                e_c=E_C_DEFAULT,
            )

    def test_blockade_regime_enforced_against_temperature(self):
        with pytest.raises(ValueError, match="blockade"):
            DeviceParams(transitions=(ChargeTransition(0.4),), e_c=E_C_DEFAULT,
                         temperature=100.0)
        DeviceParams(transitions=(ChargeTransition(0.4),), e_c=E_C_DEFAULT,
                     temperature=100.0, enforce_blockade=False)


class TestCoulombCurrent:
    def test_blockade_lifted_at_degeneracy(self, device):
        assert coulomb_current(device, 0.40, 1e-3) != 0.0

    def test_blocked_midway_below_half_height(self, device):
        mid = 0.40 + SPACING / 2
        assert coulomb_current(device, mid, 0.0214) == 0.0
        assert coulomb_current(device, mid, -0.0214) == 0.0

    def test_conducts_midway_above_half_height(self, device):
        mid = 0.40 + SPACING / 2
        assert coulomb_current(device, mid, 0.0215) != 0.0

    def test_drain_decoupled_transition_carries_nothing(self):
        dev = DeviceParams(
            transitions=(ChargeTransition(0.4, gamma_s=48.3e9, gamma_d=0.0),),
            e_c=E_C_DEFAULT,
        )
        v_g = np.linspace(0.3, 0.5, 101)
        v_s = np.linspace(-0.03, 0.03, 101)
        currents = coulomb_current(dev, v_g[None, :], v_s[:, None])
        assert np.all(currents == 0.0)

    def test_peak_conductance_at_alignment(self, device):
        v_s = 1e-4
        assert coulomb_current(device, 0.40, v_s) == pytest.approx(device.g_max * v_s)

    def test_mask_matches_rate_equation_oracle(self):
        dev = make_device(n_peaks=3, gamma_s=5e10, gamma_d=5e10)
        v_g = np.linspace(0.40 - SPACING / 2, 0.40 + 2.5 * SPACING, 60)
        v_s = np.linspace(-0.026, 0.026, 61)
        produced = coulomb_current(dev, v_g[None, :], v_s[:, None]) != 0.0
        oracle = rate_equation_mask(dev, v_g, v_s)
        disagree = np.mean(produced != oracle)
        assert disagree <= 0.01

    def test_diamond_symmetric_in_bias_for_symmetric_lever_arms(self, device):
        v_g = np.linspace(0.39, 0.49, 120)
        v_s = np.linspace(-0.025, 0.025, 121)
        mask = coulomb_current(device, v_g[None, :], v_s[:, None]) != 0.0
        assert np.array_equal(mask, mask[::-1, :])

    def test_gap_apex_equals_charging_energy(self, device):
        mid = 0.40 + SPACING / 2
        eps = 1e-5
        assert coulomb_current(device, mid, (device.e_c / Q_E) - eps) == 0.0
        assert coulomb_current(device, mid, (device.e_c / Q_E) + eps) != 0.0


class TestDispersiveCapacitance:
    def test_peak_value_at_zero_detuning(self):
        dev = DeviceParams(
            transitions=(ChargeTransition(0.4, gamma_s=48.3e9, gamma_d=0.0),),
            e_c=E_C_DEFAULT,
        )
        c_q = dispersive_capacitance(dev, 0.4, 6.9e9)
        assert c_q == pytest.approx(dev.transitions[0].c_q_max)

    def test_half_maximum_at_lifetime_detuning(self):
        t = ChargeTransition(0.4, alpha=0.8, gamma_s=48.3e9, gamma_d=0.0)
        dev = DeviceParams(transitions=(t,), e_c=E_C_DEFAULT)
        dv = PLANCK_H * t.gamma / (Q_E * t.alpha)
        c_q = dispersive_capacitance(dev, 0.4 + dv, 6.9e9)
        assert c_q == pytest.approx(t.c_q_max / 2, rel=1e-12)

    def test_fwhm_matches_dense_scan(self):
        t = ChargeTransition(0.4, alpha=0.8, gamma_s=48.3e9, gamma_d=0.0)
        dev = DeviceParams(transitions=(t,), e_c=E_C_DEFAULT)
        v = np.linspace(0.4 - 0.005, 0.4 + 0.005, 200001)
        c_q = dispersive_capacitance(dev, v, 6.9e9)
        above = v[c_q >= t.c_q_max / 2]
        fwhm_scan = above.max() - above.min()
        assert fwhm_scan == pytest.approx(2 * PLANCK_H * t.gamma / (Q_E * t.alpha), rel=1e-3)

    def test_slow_reservoir_is_rf_invisible(self):
        t = ChargeTransition(0.4, alpha=0.8, gamma_s=1e8, gamma_d=0.0)
        dev = DeviceParams(transitions=(t,), e_c=E_C_DEFAULT)
        assert dispersive_capacitance(dev, 0.4, 6.9e9) == 0.0
        assert dispersive_capacitance(dev, 0.4, 1e9) == pytest.approx(t.c_q_max)

    def test_cutoff_ratio_configurable(self):
        t = ChargeTransition(0.4, alpha=0.8, gamma_s=5e8, gamma_d=0.0)
        dev = DeviceParams(transitions=(t,), e_c=E_C_DEFAULT)
        assert dispersive_capacitance(dev, 0.4, 6.9e9) == 0.0
        assert dispersive_capacitance(dev, 0.4, 6.9e9, rate_cutoff_ratio=0.01) > 0.0

    def test_lineshape_area_is_analytic(self):
        t = ChargeTransition(0.45, alpha=0.8, gamma_s=48.3e9, gamma_d=0.0)
        dev = DeviceParams(transitions=(t,), e_c=E_C_DEFAULT)
        area, _ = quad(lambda v: dispersive_capacitance(dev, v, 6.9e9), 0.35, 0.55,
                       points=[0.45], limit=200)
        expected = np.pi * t.c_q_max * PLANCK_H * t.gamma / (Q_E * t.alpha)
        assert area == pytest.approx(expected, rel=1e-3)

    def test_rf_dc_asymmetry(self):
        dev = DeviceParams(
            transitions=(ChargeTransition(0.4, gamma_s=48.3e9, gamma_d=0.0),),
            e_c=E_C_DEFAULT,
        )
        v_g = np.linspace(0.3, 0.5, 301)
        v_s = np.linspace(-0.03, 0.03, 101)
        assert np.all(coulomb_current(dev, v_g[None, :], v_s[:, None]) == 0.0)
        c_q = dispersive_capacitance(dev, v_g, 6.9e9)
        assert c_q.max() > 0.0
        assert v_g[np.argmax(c_q)] == pytest.approx(0.4, abs=1e-3)


class TestAccessTransistor:
    def test_decoupling_anchor(self, access):
        assert access_resistance(access, 0.277) == pytest.approx(1e12, rel=1e-9)

    def test_fully_on_asymptote(self, access):
        assert access_resistance(access, 2.0) == pytest.approx(access.r_on, rel=1e-9)

    def test_deep_off_ceiling(self, access):
        assert access_resistance(access, -0.5) == pytest.approx(access.r_off, rel=1e-6)

    @settings(max_examples=60, deadline=None)
    @given(
        v1=st.floats(-1.0, 2.0),
        v2=st.floats(-1.0, 2.0),
        r_on=st.floats(1.0, 1e4),
        swing=st.floats(5e-3, 0.2),
    )
    def test_resistance_monotone_non_increasing(self, v1, v2, r_on, swing):
        p = AccessTransistorParams(
            v_th=0.446, r_on=r_on, r_off=1e15, subthreshold_swing=swing,
            c_dep_max=2e-14, v_forbidden_lo=0.446, v_forbidden_hi=0.938,
        )
        lo, hi = min(v1, v2), max(v1, v2)
        assert access_resistance(p, lo) >= access_resistance(p, hi)

    def test_capacitance_peak_and_tails(self, access):
        center = 0.5 * (access.v_forbidden_lo + access.v_forbidden_hi)
        assert access_capacitance(access, center) == pytest.approx(access.c_dep_max)
        assert access_capacitance(access, access.v_forbidden_lo - 0.3) < 1e-3 * access.c_dep_max
        assert access_capacitance(access, access.v_forbidden_hi + 0.3) < 1e-3 * access.c_dep_max

    def test_capacitance_unimodal(self, access):
        v = np.linspace(-0.5, 1.5, 2001)
        c = access_capacitance(access, v)
        d = np.diff(c)
        sign_changes = np.sum(np.diff(np.sign(d[np.abs(d) > 0])) != 0)
        assert sign_changes <= 1

    def test_region_classification_matches_thresholds(self, access):
        v_wl = np.linspace(0.0, 2.0, 41)
        v_dl = np.linspace(0.0, 0.8, 17)
        for wl in v_wl:
            for dl in v_dl:
                od = wl - dl
                got = bias_region(access, od)
                if od < access.v_forbidden_lo:
                    assert got is BiasRegion.OFF
                elif od <= access.v_forbidden_hi:
                    assert got is BiasRegion.FORBIDDEN
                else:
                    assert got is BiasRegion.ON

    def test_region_boundaries_from_measured_anchors(self, access):
        assert access.v_forbidden_lo == pytest.approx(0.786 - 0.340)
        assert access.v_forbidden_hi == pytest.approx(1.278 - 0.340)

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            AccessTransistorParams(v_th=0.4, r_on=100.0, r_off=10.0,
                                   subthreshold_swing=0.02, c_dep_max=1e-14,
                                   v_forbidden_lo=0.4, v_forbidden_hi=0.9)

    def test_default_anchor_solver_roundtrip(self):
        p = default_access_params(r_on=200.0, r_off=1e14)
        assert access_resistance(p, 0.277) == pytest.approx(1e12, rel=1e-9)
