"""Independent reference implementations used only by the tests.

These deliberately share no code with the package: the transport oracle is a
finite-temperature rate equation on the charge ladder, the network oracle is
a nodal solve of the three-element ladder, and the decay oracle is a direct
evaluation of the exponential storage-discharge formula.
"""

from __future__ import annotations

import numpy as np
from scipy.constants import e as Q_E, k as K_B


def rate_equation_current(dev, v_g: float, v_s: float, temperature: float | None = None) -> float:
    """Steady-state source current of the sequential-tunneling ladder.

    Charge states 0..K are connected by the device's transitions; each bond
    carries thermally weighted in/out rates to source and drain.  The chain
    is stationary when every bond's net flow vanishes, which fixes the state
    occupations by recursion; the source-barrier flux then gives the current.
    """
    t_k = temperature if temperature is not None else dev.temperature
    kt = K_B * t_k
    mu_s = -Q_E * v_s
    mu_d = 0.0

    trans = dev.transitions
    n_states = len(trans) + 1

    def log_fermi(x):
        # log of 1/(1+exp(x/kt)), stable for large |x|
        return -np.logaddexp(0.0, x / kt)

    log_up_s, log_up_d, log_dn_s, log_dn_d = [], [], [], []
    for t in trans:
        mu_k = Q_E * t.alpha * (t.v_peak - v_g) - Q_E * dev.alpha_s * v_s
        ls = np.log(t.gamma_s) if t.gamma_s > 0 else -np.inf
        ld = np.log(t.gamma_d) if t.gamma_d > 0 else -np.inf
        log_up_s.append(ls + log_fermi(mu_k - mu_s))
        log_dn_s.append(ls + log_fermi(mu_s - mu_k))
        log_up_d.append(ld + log_fermi(mu_k - mu_d))
        log_dn_d.append(ld + log_fermi(mu_d - mu_k))

    log_p = np.full(n_states, -np.inf)
    log_p[0] = 0.0
    for k in range(1, n_states):
        up = np.logaddexp(log_up_s[k - 1], log_up_d[k - 1])
        dn = np.logaddexp(log_dn_s[k - 1], log_dn_d[k - 1])
        if np.isneginf(up):
            # no way up: everything above is unreachable from below
            break
        if np.isneginf(dn):
            # no way back down: all probability sits at or above k
            log_p[:k] = -np.inf
            log_p[k] = 0.0
            continue
        log_p[k] = log_p[k - 1] + up - dn

    norm = np.logaddexp.reduce(log_p)
    p = np.exp(log_p - norm)

    current = 0.0
    for k in range(1, n_states):
        flux_in = p[k - 1] * np.exp(log_up_s[k - 1]) if np.isfinite(log_up_s[k - 1]) else 0.0
        flux_out = p[k] * np.exp(log_dn_s[k - 1]) if np.isfinite(log_dn_s[k - 1]) else 0.0
        current += flux_in - flux_out
    return Q_E * current


def rate_equation_mask(dev, v_g_grid, v_s_grid, rel_threshold: float = 1e-3) -> np.ndarray:
    """Conducting/blocked mask of the rate-equation oracle over a grid."""
    currents = np.empty((len(v_s_grid), len(v_g_grid)))
    for i, v_s in enumerate(v_s_grid):
        for j, v_g in enumerate(v_g_grid):
            currents[i, j] = rate_equation_current(dev, float(v_g), float(v_s))
    peak = np.abs(currents).max()
    return np.abs(currents) > rel_threshold * peak


def nodal_input_impedance(spec, z_load, f: float) -> complex:
    """Input impedance of the pi network by 2-node nodal analysis."""
    w = 2.0 * np.pi * f
    y_cs = 1j * w * spec.c_s
    y_l = 1.0 / (spec.r_loss + 1j * w * spec.l)
    y_cp = 1j * w * spec.c_p
    y_load = 0.0 if np.isinf(z_load) else 1.0 / z_load
    y_matrix = np.array(
        [[y_cs + y_l, -y_l], [-y_l, y_l + y_cp + y_load]], dtype=complex
    )
    rhs = np.array([1.0, 0.0], dtype=complex)
    v = np.linalg.solve(y_matrix, rhs)
    return complex(v[0])


def discharge_voltage(t, v_dl: float, r_acc: float, r_g: float, c_cell: float) -> np.ndarray:
    """Stored voltage during discharge from a fully charged node.

    Direct evaluation of v0 * (1 + (r_acc/r_g) * exp(-t/tau)) with
    v0 = v_dl * r_g / (r_acc + r_g) and tau = c_cell * r_g * r_acc / (r_g + r_acc).
    """
    v0 = v_dl * r_g / (r_acc + r_g)
    tau = c_cell * r_g * r_acc / (r_g + r_acc)
    return v0 * (1.0 + (r_acc / r_g) * np.exp(-np.asarray(t) / tau))
