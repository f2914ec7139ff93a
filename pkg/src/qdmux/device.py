"""Static physics of one quantum-dot transistor and its series access transistor.

The quantum dot is described by a constant-interaction picture: a ladder of
charge transitions at gate voltages ``v_peak``, a single charging energy
``e_c`` that sets the height of every blockade diamond, and gate/source lever
arms that set the diamond edge slopes.  Two observables are derived from it:

* ``coulomb_current`` -- DC source-drain transport (requires tunnel rates to
  both reservoirs),
* ``dispersive_capacitance`` -- the parametric capacitance seen by an RF probe
  on the gate, which only needs one sufficiently fast reservoir and therefore
  can reveal transitions that carry no DC current.

The access transistor is a phenomenological three-region switch (off /
depletion / on) described by a logistic subthreshold conductance and a
depletion-capacitance bump.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import e as Q_E, h as PLANCK_H, k as K_B


class BiasRegion(enum.Enum):
    """Readout regions of the access transistor versus gate overdrive."""

    OFF = "off"
    FORBIDDEN = "forbidden"
    ON = "on"


@dataclass(frozen=True)
class ChargeTransition:
    """One charge degeneracy point of the dot.

    ``v_peak`` is the effective gate voltage at which the dot and source Fermi
    levels align.  ``gamma_s`` / ``gamma_d`` are the tunnel rates to source and
    drain in Hz; a transition with one vanishing rate is invisible in DC
    transport but still produces a dispersive response.  ``c_q_max`` is the
    parametric capacitance at zero detuning; if not given it defaults to the
    lifetime-broadened scale (e*alpha)^2 / (2*h*gamma).
    """

    v_peak: float
    alpha: float = 0.8
    gamma_s: float = 0.0
    gamma_d: float = 0.0
    c_q_max: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.v_peak):
            raise ValueError("v_peak must be finite")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.gamma_s < 0.0 or self.gamma_d < 0.0:
            raise ValueError("tunnel rates must be >= 0")
        if self.c_q_max is None:
            gamma = max(self.gamma_s, self.gamma_d)
            cq = (Q_E * self.alpha) ** 2 / (2.0 * PLANCK_H * gamma) if gamma > 0 else 0.0
            object.__setattr__(self, "c_q_max", cq)
        if self.c_q_max < 0.0:
            raise ValueError("c_q_max must be >= 0")

    @property
    def gamma(self) -> float:
        """Dominant reservoir rate, the one that sets the lineshape width."""
        return max(self.gamma_s, self.gamma_d)

    @property
    def fwhm_v(self) -> float:
        """Lineshape full width at half maximum in gate volts, 2*h*gamma/(e*alpha)."""
        return 2.0 * PLANCK_H * self.gamma / (Q_E * self.alpha)

    def carries_dc(self) -> bool:
        return self.gamma_s > 0.0 and self.gamma_d > 0.0


@dataclass(frozen=True)
class DeviceParams:
    """Charge ladder and energy scales of one QD transistor.

    ``alpha_s`` is the source lever arm: the fraction of source voltage that
    shifts the dot potential, which fixes the two diamond edge slopes
    +alpha/(1-alpha_s) and -alpha/alpha_s.  ``c_gate`` is the geometric gate
    capacitance of the dot itself (small compared with the cell storage
    capacitor), the baseline the dispersive capacitance adds to.
    """

    transitions: tuple[ChargeTransition, ...]
    e_c: float
    alpha_s: float = 0.5
    g_max: float = 1e-6
    temperature: float = 0.05
    c_gate: float = 2e-15
    enforce_blockade: bool = True

    def __post_init__(self):
        object.__setattr__(self, "transitions", tuple(self.transitions))
        if self.e_c <= 0.0:
            raise ValueError("e_c must be > 0")
        if not 0.0 < self.alpha_s < 1.0:
            raise ValueError("alpha_s must be in (0, 1)")
        if self.g_max <= 0.0:
            raise ValueError("g_max must be > 0")
        if self.c_gate < 0.0:
            raise ValueError("c_gate must be >= 0")
        peaks = [t.v_peak for t in self.transitions]
        if any(b <= a for a, b in zip(peaks, peaks[1:])):
            raise ValueError("transitions must be strictly ascending in v_peak")
        if self.enforce_blockade and self.temperature > 0.0:
            if self.e_c <= 20.0 * K_B * self.temperature:
                raise ValueError(
                    f"e_c={self.e_c:.3e} J is not large against "
                    f"k_B*T={K_B * self.temperature:.3e} J; blockade regime not met"
                )

    @property
    def peak_spacing(self) -> float:
        """Canonical addition voltage e_c/(e*alpha) of the ladder."""
        alpha = self.transitions[0].alpha if self.transitions else 0.8
        return self.e_c / (Q_E * alpha)


@dataclass(frozen=True)
class AccessTransistorParams:
    """Three-region access switch: channel resistance and depletion capacitance.

    The channel conductance follows a logistic ramp in decades,
    ``G = 1/r_off + (1/r_on - 1/r_off) * s(v)`` with
    ``s(v) = u/(1+u)``, ``u = 10^((v - v_th)/subthreshold_swing)``,
    which is exponential (one decade per swing volt) deep below threshold and
    saturates at ``1/r_on`` far above.  The depletion capacitance is a
    Gaussian bump of height ``c_dep_max`` centred between the forbidden-region
    bounds.
    """

    v_th: float
    r_on: float
    r_off: float
    subthreshold_swing: float
    c_dep_max: float
    v_forbidden_lo: float
    v_forbidden_hi: float

    def __post_init__(self):
        if not (self.r_off > self.r_on > 0.0):
            raise ValueError("need r_off > r_on > 0")
        if self.subthreshold_swing <= 0.0:
            raise ValueError("subthreshold_swing must be > 0")
        if self.c_dep_max < 0.0:
            raise ValueError("c_dep_max must be >= 0")
        if not self.v_forbidden_lo < self.v_forbidden_hi:
            raise ValueError("need v_forbidden_lo < v_forbidden_hi")


def subthreshold_swing_for_anchor(
    v_anchor: float,
    r_anchor: float,
    v_th: float,
    r_on: float,
    r_off: float,
) -> float:
    """Swing such that the channel resistance equals ``r_anchor`` at ``v_anchor``.

    Inverts the logistic conductance model; used to pin the default access
    transistor to its measured decoupling point.
    """
    if not r_on < r_anchor < r_off:
        raise ValueError("r_anchor must lie strictly between r_on and r_off")
    s = (1.0 / r_anchor - 1.0 / r_off) / (1.0 / r_on - 1.0 / r_off)
    u = s / (1.0 - s)
    return (v_anchor - v_th) / math.log10(u)


# Overdrive anchors: the QD decouples below 0.277 V, and the depletion band
# spans (0.786-0.340) V to (1.278-0.340) V of word-line minus data-line.
DECOUPLING_OVERDRIVE_V = 0.277
DEFAULT_FORBIDDEN_LO = 0.786 - 0.340
DEFAULT_FORBIDDEN_HI = 1.278 - 0.340
DEFAULT_GATE_LEAK_OHM = 1e12


def default_access_params(
    r_on: float = 50.0,
    r_off: float = 1e15,
    c_dep_max: float = 2e-14,
) -> AccessTransistorParams:
    """Access transistor anchored so R(0.277 V overdrive) equals the gate leak."""
    v_th = DEFAULT_FORBIDDEN_LO
    swing = subthreshold_swing_for_anchor(
        DECOUPLING_OVERDRIVE_V, DEFAULT_GATE_LEAK_OHM, v_th, r_on, r_off
    )
    return AccessTransistorParams(
        v_th=v_th,
        r_on=r_on,
        r_off=r_off,
        subthreshold_swing=swing,
        c_dep_max=c_dep_max,
        v_forbidden_lo=DEFAULT_FORBIDDEN_LO,
        v_forbidden_hi=DEFAULT_FORBIDDEN_HI,
    )


def _blockade_gap(dev: DeviceParams, v_g: np.ndarray, positive_bias: bool) -> np.ndarray:
    """Blockade gap in joules versus gate voltage, for one bias polarity.

    Between adjacent DC-carrying transitions the gap is a tent rising from
    zero at each peak to e_c at the apex; the apex sits at the fraction
    (1 - alpha_s) of the spacing for positive bias and alpha_s for negative
    (the usual asymmetric diamond geometry).  Outside the outermost peaks the
    edges continue with the canonical spacing e_c/(e*alpha) and no cap.
    """
    peaks = np.array([t.v_peak for t in dev.transitions if t.carries_dc()])
    if peaks.size == 0:
        return np.full_like(v_g, np.inf)
    frac = (1.0 - dev.alpha_s) if positive_bias else dev.alpha_s
    gap = np.full_like(v_g, np.inf)

    d_c = dev.peak_spacing
    # region below the first peak: right-going edge only
    left = peaks[0] - v_g
    gap = np.where(left > 0.0, dev.e_c * left / ((1.0 - frac) * d_c), gap)
    # region above the last peak
    right = v_g - peaks[-1]
    gap = np.where(right > 0.0, dev.e_c * right / (frac * d_c), gap)
    # interior diamonds
    for v1, v2 in zip(peaks, peaks[1:]):
        inside = (v_g >= v1) & (v_g <= v2)
        d = v2 - v1
        rise = dev.e_c * (v_g - v1) / (frac * d)
        fall = dev.e_c * (v2 - v_g) / ((1.0 - frac) * d)
        gap = np.where(inside, np.minimum(rise, fall), gap)
    # at every DC peak the gap closes exactly
    return gap


def coulomb_current(dev: DeviceParams, v_g_eff, v_s):
    """DC source-drain current of the blockade diamond model.

    Zero wherever the bias window ``e*|v_s|`` lies below the gate-dependent
    blockade gap; ohmic with conductance ``g_max`` once the window opens.
    Only transitions with tunnel rates to both reservoirs shape the diamonds.
    Accepts scalars or broadcastable arrays.
    """
    v_g_arr, v_s_arr = np.broadcast_arrays(
        np.asarray(v_g_eff, dtype=float), np.asarray(v_s, dtype=float)
    )
    gap_up = _blockade_gap(dev, v_g_arr, positive_bias=True)
    gap_dn = _blockade_gap(dev, v_g_arr, positive_bias=False)
    gap = np.where(v_s_arr >= 0.0, gap_up, gap_dn)
    conducting = Q_E * np.abs(v_s_arr) >= gap
    current = np.where(conducting, dev.g_max * v_s_arr, 0.0)
    if np.isscalar(v_g_eff) and np.isscalar(v_s):
        return float(current)
    return current


def dispersive_capacitance(dev: DeviceParams, v_g_eff, f_probe: float, rate_cutoff_ratio: float = 0.1):
    """Parametric gate capacitance summed over RF-visible transitions.

    Each transition contributes a Lorentzian
    ``c_q_max * (h*gamma)^2 / ((h*gamma)^2 + (e*alpha*(v - v_peak))^2)`` with
    ``gamma = max(gamma_s, gamma_d)``, provided that rate is at least
    ``rate_cutoff_ratio * f_probe`` (cyclic tunneling must keep up with the
    probe).  Accepts scalar or array gate voltage.
    """
    if f_probe <= 0.0:
        raise ValueError("f_probe must be > 0")
    v = np.asarray(v_g_eff, dtype=float)
    c_q = np.zeros_like(v)
    for t in dev.transitions:
        if t.gamma < rate_cutoff_ratio * f_probe:
            continue
        hw = PLANCK_H * t.gamma
        det = Q_E * t.alpha * (v - t.v_peak)
        c_q = c_q + t.c_q_max * hw * hw / (hw * hw + det * det)
    if np.isscalar(v_g_eff):
        return float(c_q)
    return c_q


def _switch_fraction(p: AccessTransistorParams, v_overdrive) -> np.ndarray:
    v = np.asarray(v_overdrive, dtype=float)
    decades = (v - p.v_th) / p.subthreshold_swing
    # logistic in log10-conductance space; clip keeps exp in range
    return 1.0 / (1.0 + 10.0 ** np.clip(-decades, -300.0, 300.0))


def access_resistance(p: AccessTransistorParams, v_overdrive):
    """Channel resistance versus overdrive ``v_wl - v_dl``.

    Monotone non-increasing: exponential subthreshold rise saturating at
    ``r_off`` below threshold, approaching ``r_on`` above the depletion band.
    """
    g = 1.0 / p.r_off + (1.0 / p.r_on - 1.0 / p.r_off) * _switch_fraction(p, v_overdrive)
    r = 1.0 / g
    if np.isscalar(v_overdrive):
        return float(r)
    return r


def access_capacitance(p: AccessTransistorParams, v_overdrive):
    """Depletion capacitance bump centred in the forbidden overdrive band."""
    v = np.asarray(v_overdrive, dtype=float)
    center = 0.5 * (p.v_forbidden_lo + p.v_forbidden_hi)
    sigma = (p.v_forbidden_hi - p.v_forbidden_lo) / 6.0
    c = p.c_dep_max * np.exp(-0.5 * ((v - center) / sigma) ** 2)
    if np.isscalar(v_overdrive):
        return float(c)
    return c


def bias_region(p: AccessTransistorParams, v_overdrive):
    """Classify overdrive into the Off / Forbidden / On readout regions."""
    v = np.asarray(v_overdrive, dtype=float)
    if v.ndim == 0:
        if float(v) < p.v_forbidden_lo:
            return BiasRegion.OFF
        if float(v) <= p.v_forbidden_hi:
            return BiasRegion.FORBIDDEN
        return BiasRegion.ON
    out = np.full(v.shape, BiasRegion.FORBIDDEN, dtype=object)
    out[v < p.v_forbidden_lo] = BiasRegion.OFF
    out[v > p.v_forbidden_hi] = BiasRegion.ON
    return out
