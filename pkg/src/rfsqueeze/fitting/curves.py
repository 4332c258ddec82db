"""Fits of the four characterisation curves of a resonance-fluorescence source.

Wrappers rescale abscissa and ordinate to O(1), derive starting values from
the data, call :func:`least_squares`, and map results back to input units.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from ..physics import PhysicsWarning, t2_from_linewidth
from .lm import FitResult, least_squares
from .models import decay_model, rabi_model, saturation_model, voigt_fwhm, voigt_model

DEFAULT_INSTRUMENT_FWHM = 220e6  # Hz, scanning Fabry-Perot resolution


def _rescaled(res: FitResult, scales: dict[str, float]) -> FitResult:
    params = {k: v * scales.get(k, 1.0) for k, v in res.params.items()}
    std = None
    if res.std_errors is not None:
        std = {k: v * abs(scales.get(k, 1.0)) for k, v in res.std_errors.items()}
    return FitResult(
        params=params, std_errors=std, residual_norm=res.residual_norm, converged=res.converged,
        n_iter=res.n_iter, chi2=res.chi2, dof=res.dof, at_bounds=res.at_bounds, derived=dict(res.derived),
    )


def _arrays(x, y, sigma):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D arrays of equal length")
    s = None if sigma is None else np.asarray(sigma, dtype=float)
    return x, y, s


def fit_saturation(power, counts, sigma=None) -> FitResult:
    """Fit ``i_inf * P / (P + p_sat)`` to a count-rate versus power curve."""
    x, y, s = _arrays(power, counts, sigma)
    pos = (x > 0) & (y > 0)
    if pos.sum() < 2:
        raise ValueError("need at least two points with positive power and counts")
    xs = float(np.median(x[pos]))
    ys = float(np.max(y))
    # 1/y = 1/i_inf + (p_sat/i_inf) / P
    b, a = np.polyfit(xs / x[pos], ys / y[pos], 1)
    if a > 0 and b > 0:
        init = (1.0 / a, b / a)
    else:
        init = (2.0, 1.0)
    res = least_squares(saturation_model(), x / xs, y / ys, None if s is None else s / ys, init)
    return _rescaled(res, {"i_inf": ys, "p_sat": xs})


def fit_exp_decay(
    histogram,
    irf_sigma: float = 0.0,
    *,
    t0: float | None = None,
    reweight: int = 2,
) -> FitResult:
    """Fit a lifetime histogram with an exponential convolved with a Gaussian IRF.

    ``histogram`` is a :class:`~rfsqueeze.analyze.DecayHistogram` or a
    ``(bin_centres_seconds, counts)`` pair. Counting errors are Poisson: the
    first pass weights by the data, later passes by the previous model.

    With ``irf_sigma == 0`` the onset ``t0`` cannot be fitted against the
    amplitude; it is fixed (to the given value or the left edge of the
    peak bin) and only later bins are used.
    """
    if hasattr(histogram, "centers"):
        times, counts = histogram.centers, histogram.counts
    else:
        times, counts = histogram
    x, y, _ = _arrays(times, counts, None)
    if y.size == 0 or y.max() <= 0:
        raise ValueError("histogram is empty")
    if irf_sigma < 0:
        raise ValueError(f"irf_sigma: must be >= 0, got {irf_sigma!r}")
    dx = float(np.median(np.diff(x))) if x.size > 1 else 1.0
    i_peak = int(np.argmax(y))
    bg0 = float(np.percentile(y, 5))
    amp0 = float(y[i_peak] - bg0)
    below = np.flatnonzero((y[i_peak:] - bg0) < amp0 / math.e)
    tau0 = max(float(x[i_peak + below[0]] - x[i_peak]) if below.size else 10 * dx, dx)
    xs = tau0
    ys = max(amp0, 1.0)

    fixed: tuple[str, ...] = ()
    if irf_sigma == 0:
        t0_val = float(x[i_peak] - 0.5 * dx) if t0 is None else float(t0)
        keep = x > t0_val
        x, y = x[keep], y[keep]
        fixed = ("t0",)
        init_t0 = t0_val
    else:
        init_t0 = float(x[i_peak]) - irf_sigma if t0 is None else float(t0)
        if t0 is not None:
            fixed = ("t0",)
    model = decay_model(irf_sigma / xs)
    init = [tau0 / xs, amp0 / ys, bg0 / ys, init_t0 / xs]
    xn, yn = x / xs, y / ys
    sig = np.sqrt(np.maximum(y, 1.0)) / ys
    res = least_squares(model, xn, yn, sig, init, fixed=fixed)
    for _ in range(reweight):
        mu = model(xn, [res.params[n] for n in model.names]) * ys
        sig = np.sqrt(np.maximum(mu, 1.0)) / ys
        res = least_squares(model, xn, yn, sig, res.params, fixed=fixed)
    out = _rescaled(res, {"t1": xs, "amplitude": ys, "background": ys, "t0": xs})
    out.derived["irf_sigma"] = float(irf_sigma)
    if "t1" in out.at_bounds:
        warnings.warn("fitted lifetime sits on its bound", RuntimeWarning)
    return out


def _pe(theta, gamma):
    return 0.5 * (1.0 - np.exp(-gamma * theta) * np.cos(theta))


def fit_rabi(drive, counts, sigma=None, *, abscissa: str = "amplitude") -> FitResult:
    """Fit a damped Rabi oscillation; ``derived['pi_setting']`` is the drive value where the area is pi.

    ``abscissa="power"`` treats the x data as laser power (area ~ sqrt(power)).
    """
    x, y, s = _arrays(drive, counts, sigma)
    if np.any(x < 0):
        raise ValueError("drive values must be >= 0")
    xs = float(x.max())
    ys = float(y.max())
    if xs <= 0 or ys <= 0:
        raise ValueError("drive and counts must contain positive values")
    xn, yn = x / xs, y / ys
    a = np.sqrt(xn) if abscissa == "power" else xn
    best = None
    for gamma in (0.0, 0.02, 0.05, 0.1, 0.2, 0.5):
        for area_scale in np.geomspace(0.5 * math.pi, 20 * math.pi, 600):
            pe = _pe(area_scale * a, gamma)
            c = float(pe @ yn / (pe @ pe))
            sse = float(np.sum((yn - c * pe) ** 2))
            if best is None or sse < best[0]:
                best = (sse, area_scale, gamma, c)
    _, s0, g0, c0 = best
    model = rabi_model(abscissa)
    res = least_squares(model, xn, yn, None if s is None else s / ys, (s0, g0, c0))
    area_scale_unit = 1.0 / math.sqrt(xs) if abscissa == "power" else 1.0 / xs
    out = _rescaled(res, {"area_scale": area_scale_unit, "count_scale": ys})
    k = out.params["area_scale"]
    out.derived["pi_setting"] = (math.pi / k) ** 2 if abscissa == "power" else math.pi / k
    out.derived["abscissa_is_power"] = float(abscissa == "power")
    return out


def _half_max_width(x, y, bg):
    i = int(np.argmax(y))
    half = bg + 0.5 * (y[i] - bg)
    left = np.flatnonzero(y[:i] < half)
    right = np.flatnonzero(y[i:] < half)
    xl = x[left[-1]] if left.size else x[0]
    xr = x[i + right[0]] if right.size else x[-1]
    return max(float(xr - xl), float(np.median(np.diff(x))))


def fit_voigt(
    frequency,
    intensity,
    sigma=None,
    *,
    gauss_fwhm: float = DEFAULT_INSTRUMENT_FWHM,
    fix_gauss: bool = True,
) -> FitResult:
    """Fit a Voigt line on a flat background.

    The Gaussian width is the instrument resolution and is held fixed unless
    ``fix_gauss=False``. ``derived`` carries the Olivero-Longbothum total
    FWHM and the coherence time of the Lorentzian component.
    """
    x, y, s = _arrays(frequency, intensity, sigma)
    if gauss_fwhm < 0:
        raise ValueError(f"gauss_fwhm: must be >= 0, got {gauss_fwhm!r}")
    bg0 = float(np.percentile(y, 5))
    width = _half_max_width(x, y, bg0)
    xs = width
    ys = float(np.max(y) - bg0) or 1.0
    x0 = float(x[int(np.argmax(y))])
    l0 = max(width - 0.5 * gauss_fwhm, 0.1 * width)
    area0 = (float(np.max(y)) - bg0) * math.pi * l0 / 2.0
    init = [(x0) / xs, l0 / xs, gauss_fwhm / xs, area0 / (xs * ys), bg0 / ys]
    fixed = ("gauss_fwhm",) if fix_gauss or gauss_fwhm == 0 else ()
    # centre shift keeps the centre parameter O(1)
    shift = x0
    init[0] = 0.0
    res = least_squares(
        voigt_model(), (x - shift) / xs, y / ys, None if s is None else s / ys, init, fixed=fixed
    )
    out = _rescaled(
        res,
        {"center": xs, "lorentz_fwhm": xs, "gauss_fwhm": xs, "amplitude": xs * ys, "background": ys},
    )
    out.params["center"] += shift
    fl = out.params["lorentz_fwhm"]
    out.derived["total_fwhm"] = voigt_fwhm(fl, out.params["gauss_fwhm"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PhysicsWarning)
        out.derived["t2"] = t2_from_linewidth(fl)
    return out
