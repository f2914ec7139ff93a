"""Fitting and signal-processing toolkit for simulated readout data.

Covers the full measurement post-processing chain: per-segment polynomial
background subtraction, lifetime-broadened (Lorentzian) Coulomb-peak fits,
signal-to-noise and minimum-integration-time estimates, storage-node decay
fits, reflection-dip fits, and charging-energy extraction from diamond maps.
All routines are pure functions; non-convergent fits raise
:class:`~qdmux.errors.FitNonConvergence` rather than returning junk.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import median_filter
from scipy.optimize import least_squares, minimize_scalar
from scipy.signal import find_peaks

from scipy.constants import e as Q_E, h as PLANCK_H

from .errors import DipNotFound, FitNonConvergence, ValidationError


@dataclass(frozen=True)
class PeakFit:
    """Lorentzian Coulomb-peak fit result.

    ``gamma`` is the tunnel rate inferred from the voltage-domain width via
    ``fwhm = 2*h*gamma/(e*alpha)`` for the lever arm supplied to the fit.
    """

    amplitude: float
    center: float
    gamma: float
    fwhm: float
    r_squared: float
    offset: float = 0.0

    def __post_init__(self):
        if self.amplitude <= 0.0:
            raise ValueError("amplitude must be > 0")
        if self.fwhm <= 0.0:
            raise ValueError("fwhm must be > 0")
        if not 0.0 <= self.r_squared <= 1.0:
            raise ValueError("r_squared must be in [0, 1]")


@dataclass(frozen=True)
class ResonanceFit:
    """Reflection-dip fit: centre, width, quality factor, and depth in dB."""

    f_res: float
    delta_f: float
    q: float
    delta_s11: float

    def __post_init__(self):
        if self.f_res <= 0.0:
            raise ValueError("f_res must be > 0")
        if self.delta_f <= 0.0:
            raise ValueError("delta_f must be > 0")
        if abs(self.q * self.delta_f / self.f_res - 1.0) > 1e-9:
            raise ValueError("q must equal f_res/delta_f")


@dataclass(frozen=True)
class RetentionFit:
    """Exponential storage-decay fit v(t) = v0 * (1 + ratio * exp(-t/tau))."""

    tau: float
    v0: float
    ratio: float

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ValueError("tau must be > 0")


def _masked_polyfit(x: np.ndarray, y: np.ndarray, degree: int, mask_k: float, n_iter: int):
    """Least-squares polynomial with iterative masking of positive outliers.

    The exclusion region is dilated around every outlier so the fat tails of
    a peak (which sit below the threshold) do not drag the background up and
    bite into the peak flanks.
    """
    dilation = max(2, x.size // 25)
    kernel = np.ones(2 * dilation + 1)
    keep = np.ones(x.shape, dtype=bool)
    poly = np.polynomial.Polynomial.fit(x, y, degree)
    span = float(np.max(np.abs(y))) + 1e-30
    for _ in range(n_iter):
        resid = y - poly(x)
        mad = np.median(np.abs(resid[keep] - np.median(resid[keep])))
        scale = 1.4826 * mad
        if scale <= 0.0:
            break
        outlier = resid > mask_k * scale
        outlier = np.convolve(outlier.astype(float), kernel, mode="same") > 0
        new_keep = ~outlier
        if new_keep.sum() < max(degree + 2, x.size // 3):
            break
        if np.array_equal(new_keep, keep):
            break
        candidate = np.polynomial.Polynomial.fit(x[new_keep], y[new_keep], degree)
        # an unconstrained stretch can let the polynomial run away; keep the
        # previous stable fit if the candidate leaves the data range
        if np.max(np.abs(candidate(x))) > 3.0 * span + 10.0 * scale:
            break
        keep = new_keep
        poly = candidate
    return poly


def subtract_background(trace, degree: int = 5, mask_k: float = 3.0, n_iter: int = 3):
    """Remove a per-segment polynomial background from a trace.

    Each segment is fitted with a degree-``degree`` polynomial in time while
    iteratively masking samples more than ``mask_k`` robust standard
    deviations above the fit, so Coulomb peaks survive as positive residuals.
    Returns a new trace of the same shape.
    """
    if degree < 0:
        raise ValidationError("degree must be >= 0")
    out = np.empty_like(trace.v_mw)
    for window in trace.segments:
        sel = trace.segment_mask(window)
        if sel.sum() < degree + 2:
            raise ValidationError(
                f"segment [{window.t_start:.6g}, {window.t_end:.6g}) has "
                f"{int(sel.sum())} samples; need at least degree+2 = {degree + 2}"
            )
        poly = _masked_polyfit(trace.t[sel], trace.v_mw[sel], degree, mask_k, n_iter)
        out[sel] = trace.v_mw[sel] - poly(trace.t[sel])
    return trace.with_values(out)


def _lorentzian(v, amplitude, center, fwhm, offset):
    half = 0.5 * fwhm
    return offset + amplitude * half * half / (half * half + (v - center) ** 2)


def fit_lorentzian(v, y, alpha: float, fit_window_fwhm: float = 4.0) -> PeakFit:
    """Fit the dominant peak of a segment with a Lorentzian plus offset.

    The fit is restricted to a window of ``fit_window_fwhm`` initial widths
    around the sample argmax, so secondary peaks elsewhere in the segment
    cannot drag the optimiser into a blend of several lines.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValidationError("alpha must be in (0, 1]")
    v = np.asarray(v, dtype=float)
    y = np.asarray(y, dtype=float)
    if v.ndim != 1 or v.shape != y.shape or v.size < 6:
        raise ValidationError("need matching 1-d arrays with at least 6 samples")

    order = np.argsort(v)
    v, y = v[order], y[order]
    base = np.median(y)
    i_max = int(np.argmax(y))
    amp0 = y[i_max] - base
    if amp0 <= 0.0:
        raise FitNonConvergence("no positive peak above the baseline")
    half_level = base + 0.5 * amp0
    above = y >= half_level
    lo = i_max
    while lo > 0 and above[lo - 1]:
        lo -= 1
    hi = i_max
    while hi < v.size - 1 and above[hi + 1]:
        hi += 1
    fwhm0 = max(v[hi] - v[lo], 2.0 * np.median(np.diff(v)))

    window = np.abs(v - v[i_max]) <= fit_window_fwhm * fwhm0
    if window.sum() < 6:
        window = np.zeros_like(window)
        window[max(i_max - 3, 0):i_max + 4] = True
    vw, yw = v[window], y[window]

    x0 = np.array([amp0, v[i_max], fwhm0, base])
    span = v[-1] - v[0]
    bounds = (
        [1e-12 * max(amp0, 1e-30), v[0] - span, 1e-6 * fwhm0, -np.inf],
        [np.inf, v[-1] + span, 10.0 * span, np.inf],
    )

    def resid(p):
        return _lorentzian(vw, *p) - yw

    result = least_squares(
        resid, x0, bounds=bounds, method="trf",
        xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=4000,
    )
    amp, center, fwhm, offset = result.x
    ss_res = float(np.sum(result.fun**2))
    ss_tot = float(np.sum((yw - yw.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    if not result.success or amp <= 0.0 or fwhm <= 0.0 or r2 < 0.0:
        raise FitNonConvergence(
            f"Lorentzian fit failed (status {result.status})",
            residual_norm=math.sqrt(ss_res),
        )
    gamma = Q_E * alpha * fwhm / (2.0 * PLANCK_H)
    return PeakFit(
        amplitude=float(amp),
        center=float(center),
        gamma=float(gamma),
        fwhm=float(fwhm),
        r_squared=min(max(r2, 0.0), 1.0),
        offset=float(offset),
    )


def snr(fit: PeakFit, noise_samples) -> float:
    """Signal-to-noise ratio: fitted peak amplitude over noise standard deviation."""
    noise = np.asarray(noise_samples, dtype=float)
    if noise.size < 30:
        raise ValidationError(f"need at least 30 noise samples, got {noise.size}")
    sigma = float(np.std(noise, ddof=1))
    if sigma == 0.0:
        warnings.warn("zero noise standard deviation; SNR reported as infinity")
        return math.inf
    return fit.amplitude / sigma


def min_integration_time(snr_value: float, t_int: float) -> float:
    """Integration time at which the SNR would reach 1, assuming white noise.

    With signal fixed and noise averaging down as 1/sqrt(t), SNR grows as
    sqrt(t), so the unity-SNR time is ``t_int / snr**2``.
    """
    if snr_value <= 0.0:
        raise ValidationError("snr must be > 0")
    if t_int <= 0.0:
        raise ValidationError("t_int must be > 0")
    return t_int / (snr_value * snr_value)


def fit_retention(points) -> RetentionFit:
    """Fit storage-node decay samples ``(t_i, v_i)`` to v0*(1 + ratio*exp(-t/tau)).

    Profiles the residual over tau (the offset and decay amplitude are linear
    given tau), then polishes all three parameters together.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ValidationError("need at least 3 (t, v) points")
    t = pts[:, 0]
    v = pts[:, 1]
    v_span = float(v.max() - v.min())
    if v_span <= 1e-15 * max(abs(float(v.max())), 1.0):
        raise FitNonConvergence("flat decay trace: tau is unidentifiable")
    t_span = float(t.max() - t.min())
    if t_span <= 0.0:
        raise ValidationError("time points must not be all equal")

    def linear_fit(tau):
        basis = np.column_stack([np.ones_like(t), np.exp(-t / tau)])
        coef, *_ = np.linalg.lstsq(basis, v, rcond=None)
        resid = basis @ coef - v
        return coef, float(resid @ resid)

    result = minimize_scalar(
        lambda log_tau: linear_fit(math.exp(log_tau))[1],
        bounds=(math.log(t_span * 1e-3), math.log(t_span * 1e3)),
        method="bounded",
        options={"xatol": 1e-12},
    )
    tau0 = math.exp(result.x)
    (c0, a0), _ = linear_fit(tau0)

    def resid(p):
        c, a, tau = p
        return c + a * np.exp(-t / tau) - v

    polish = least_squares(
        resid, [c0, a0, tau0], method="lm", xtol=1e-15, ftol=1e-15, max_nfev=2000
    )
    c, a, tau = polish.x
    norm = float(np.linalg.norm(polish.fun))
    if tau <= 0.0 or not math.isfinite(tau):
        raise FitNonConvergence("decay fit produced a non-positive time constant", norm)
    if abs(c) < 1e-30 or abs(a / c) < 1e-9:
        raise FitNonConvergence("decay amplitude is degenerate (flat fit)", norm)
    return RetentionFit(tau=float(tau), v0=float(c), ratio=float(a / c))


def _dip_model(f, baseline, floor, kappa, f0):
    lor = kappa * kappa / (kappa * kappa + (f - f0) ** 2)
    val = baseline * baseline - (baseline * baseline - floor * floor) * lor
    return np.sqrt(np.clip(val, 1e-30, None))


def fit_resonance(f, s11) -> ResonanceFit:
    """Fit a reflection dip on linear ``|S11|`` samples.

    The model magnitude squares to a Lorentzian power dip,
    ``|S11|^2 = b^2 - (b^2 - m^2) * k^2/(k^2 + (f - f0)^2)``, which is the
    response of a single matched resonance.  The reported ``delta_f`` is the
    full width at half depth of the fitted linear-magnitude dip and
    ``delta_s11`` the dip depth in dB.
    """
    f = np.asarray(f, dtype=float)
    s = np.asarray(s11, dtype=float)
    if f.ndim != 1 or f.shape != s.shape or f.size < 8:
        raise ValidationError("need matching 1-d arrays with at least 8 samples")
    order = np.argsort(f)
    f, s = f[order], s[order]

    n_edge = max(f.size // 10, 2)
    edges = np.concatenate([s[:n_edge], s[-n_edge:]])
    baseline0 = float(np.median(edges))
    i_min = int(np.argmin(s))
    floor0 = float(s[i_min])
    depth0 = baseline0 - floor0
    edge_mad = 1.4826 * float(np.median(np.abs(edges - baseline0)))
    if depth0 <= max(6.0 * edge_mad, 0.02 * baseline0):
        raise DipNotFound("no dip found above the spectrum noise floor")

    level = baseline0 - 0.5 * depth0
    below = s <= level
    lo = i_min
    while lo > 0 and below[lo - 1]:
        lo -= 1
    hi = i_min
    while hi < f.size - 1 and below[hi + 1]:
        hi += 1
    kappa0 = max(0.5 * (f[hi] - f[lo]), float(np.median(np.diff(f))))

    x0 = np.array([baseline0, max(floor0, 1e-6 * baseline0), kappa0, f[i_min]])
    bounds = (
        [1e-12, 1e-12, 1e-9 * kappa0, f[0]],
        [np.inf, np.inf, 100.0 * (f[-1] - f[0]), f[-1]],
    )

    def resid(p):
        return _dip_model(f, *p) - s

    result = least_squares(resid, x0, bounds=bounds, method="trf", xtol=1e-15, ftol=1e-15)
    baseline, floor, kappa, f0 = result.x
    norm = float(np.linalg.norm(result.fun))
    if not result.success or floor >= baseline:
        raise FitNonConvergence("resonance dip fit failed", norm)

    half = 0.5 * (baseline + floor)
    num = half * half - floor * floor
    den = baseline * baseline - half * half
    delta_f = 2.0 * kappa * math.sqrt(num / den)
    depth_db = 20.0 * math.log10(baseline / max(floor, 1e-15))
    return ResonanceFit(
        f_res=float(f0),
        delta_f=float(delta_f),
        q=float(f0 / delta_f),
        delta_s11=float(depth_db),
    )


def _boundary_crossings(v_s: np.ndarray, conducting: np.ndarray) -> np.ndarray:
    """Per-column |v_s| extent of the blockade region around v_s = 0."""
    n_s, n_dl = conducting.shape
    zero_idx = int(np.argmin(np.abs(v_s)))
    extent = np.full(n_dl, np.nan)
    for col in range(n_dl):
        column = conducting[:, col]
        up = np.nan
        for i in range(zero_idx, n_s):
            if column[i]:
                up = 0.5 * (v_s[i] + v_s[i - 1]) if i > zero_idx else v_s[i]
                break
        extent[col] = up
    return extent


def extract_charging_energy(stability_map, conduction_threshold: float = 0.02) -> float:
    """Charging energy e * delta-V_S from the blockade apexes of a diamond map.

    The map is median-smoothed and thresholded into blocked/conducting, the
    upper blockade boundary is traced per gate column, and each interior
    diamond's apex is located by intersecting straight-line fits to the
    rising and falling boundary flanks (sub-grid accuracy, robust to noise).
    The mean apex bias times the electron charge is returned.
    """
    values = np.abs(np.asarray(stability_map.values, dtype=float))
    v_dl = np.asarray(stability_map.v_dl, dtype=float)
    v_s = np.asarray(stability_map.v_s, dtype=float)
    if values.shape != (v_s.size, v_dl.size):
        raise ValidationError("map values must be shaped (len(v_s), len(v_dl))")
    if v_s.max() <= 0.0:
        raise ValidationError("map must include positive source bias")

    smooth = median_filter(values, size=3, mode="nearest")
    noise_scale = 1.4826 * float(np.median(np.abs(values - smooth)))
    threshold = max(conduction_threshold * smooth.max(), 6.0 * noise_scale)
    conducting = smooth > threshold
    boundary = _boundary_crossings(v_s, conducting)
    if np.isnan(boundary).all():
        raise ValidationError("incomplete diamond: no conduction boundary found")
    filled = boundary.copy()
    filled[np.isnan(filled)] = v_s.max()

    # peaks of the boundary are apex candidates; valleys separate diamonds
    min_sep = max(3, v_dl.size // 50)
    apex_idx, _ = find_peaks(filled, distance=min_sep)
    valley_idx, _ = find_peaks(-filled, distance=min_sep)
    apex_idx = [
        i for i in apex_idx
        if valley_idx.size and valley_idx.min() < i < valley_idx.max()
    ]
    if not apex_idx:
        raise ValidationError("incomplete diamond: no interior apex between valleys")

    heights = []
    for i_apex in apex_idx:
        lo = int(valley_idx[valley_idx < i_apex].max())
        hi = int(valley_idx[valley_idx > i_apex].min())
        # fit each flank away from the rounded apex tip and valley floor
        pad_l = max(1, (i_apex - lo) // 6)
        pad_r = max(1, (hi - i_apex) // 6)
        left_cols = np.arange(lo + pad_l, i_apex - pad_l + 1)
        right_cols = np.arange(i_apex + pad_r, hi - pad_r + 1)
        if left_cols.size < 4 or right_cols.size < 4:
            continue
        pl = np.polyfit(v_dl[left_cols], filled[left_cols], 1)
        pr = np.polyfit(v_dl[right_cols], filled[right_cols], 1)
        if pl[0] == pr[0]:
            continue
        x_apex = (pr[1] - pl[1]) / (pl[0] - pr[0])
        v_apex = np.polyval(pl, x_apex)
        if v_dl[lo] <= x_apex <= v_dl[hi] and v_apex > 0:
            heights.append(v_apex)
    if not heights:
        raise ValidationError("incomplete diamond: apex fits failed")
    return Q_E * float(np.mean(heights))


def match_decay_peaks(t, i_s, static_v, static_i, n_peaks: int = 4, t_min: float = 0.0):
    """Pair Coulomb-peak crossing times of a decay trace with static positions.

    ``(t, i_s)`` is the current-versus-time record after the hold bias is
    removed; ``(static_v, static_i)`` a fully-settled current-versus-voltage
    sweep of the same cell.  The stored voltage decays monotonically, so the
    k-th current burst in time corresponds to the k-th static peak counted
    from the top of the swept range.  Returns ``[(t_k, v_k), ...]`` ready for
    :func:`fit_retention`.
    """
    t = np.asarray(t, dtype=float)
    i_s = np.asarray(i_s, dtype=float)
    sel = t >= t_min
    tt, ii = t[sel], i_s[sel]
    if ii.max() <= 0.0:
        raise ValidationError("decay trace shows no current peaks")
    prom = 0.2 * ii.max()
    idx, props = find_peaks(ii, prominence=prom, plateau_size=1)
    t_peaks = []
    for k in range(idx.size):
        left = int(props["left_edges"][k])
        right = int(props["right_edges"][k])
        t_peaks.append(0.5 * (tt[left] + tt[right]))

    sv = np.asarray(static_v, dtype=float)
    si = np.asarray(static_i, dtype=float)
    vidx, vprops = find_peaks(si, prominence=0.2 * si.max(), plateau_size=1)
    v_peaks = []
    for k in range(vidx.size):
        left = int(vprops["left_edges"][k])
        right = int(vprops["right_edges"][k])
        v_peaks.append(0.5 * (sv[left] + sv[right]))
    v_peaks = sorted(v_peaks, reverse=True)

    n = min(n_peaks, len(t_peaks), len(v_peaks))
    if n < 3:
        raise ValidationError(
            f"need at least 3 matched peaks for a decay fit, found {n}"
        )
    return [(float(t_peaks[k]), float(v_peaks[k])) for k in range(n)]


def peak_report_row(
    fit: PeakFit,
    sigma: float,
    t_int: float,
    alpha: float,
    label: str = "",
) -> dict:
    """One benchmark-table record for a fitted Coulomb peak."""
    s = fit.amplitude / sigma if sigma > 0 else math.inf
    return {
        "label": label,
        "amplitude_v": fit.amplitude,
        "fwhm_v": fit.fwhm,
        "sigma_v": sigma,
        "snr": s,
        "t_int_s": t_int,
        "t_min_s": t_int / (s * s) if math.isfinite(s) else 0.0,
        "alpha": alpha,
        "tunnel_rate_hz": fit.gamma,
        "r_squared": fit.r_squared,
    }


def resonance_report_row(fit: ResonanceFit, label: str = "") -> dict:
    """One resonator-characteristics record (centre, depth, quality factor)."""
    return {
        "label": label,
        "f_res_hz": fit.f_res,
        "delta_f_hz": fit.delta_f,
        "delta_s11_db": fit.delta_s11,
        "q": fit.q,
    }
