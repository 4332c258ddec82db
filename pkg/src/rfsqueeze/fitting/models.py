"""Curve models with analytic Jacobians.

Each ``*_model`` returns a :class:`~rfsqueeze.fitting.lm.Model`. Inputs are
expected in the working units of the caller; the fit wrappers in
:mod:`rfsqueeze.fitting.curves` rescale to O(1) numbers first.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc, erfcx, wofz

from .lm import Model

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)
FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


# -- saturation: y = i_inf * P / (P + p_sat)


def _sat(x, th):
    i_inf, p_sat = th
    return i_inf * x / (x + p_sat)


def _sat_jac(x, th):
    i_inf, p_sat = th
    d = x + p_sat
    return np.column_stack([x / d, -i_inf * x / d**2])


def saturation_model() -> Model:
    return Model(("i_inf", "p_sat"), _sat, _sat_jac, lower=(0.0, 1e-300), upper=(np.inf, np.inf))


# -- exponential decay convolved with a Gaussian IRF, plus flat background


def emg_shape(u, tau, sigma):
    """Unit-amplitude exponential ``exp(-u/tau)`` (u >= 0) convolved with N(0, sigma).

    Evaluated through ``erfcx`` where the direct form would overflow.
    """
    u = np.asarray(u, dtype=float)
    if sigma == 0:
        return np.where(u >= 0, np.exp(-np.clip(u, 0, None) / tau), 0.0)
    z = (sigma / tau - u / sigma) / SQRT2
    out = np.empty_like(u)
    pos = z > 0
    out[pos] = 0.5 * erfcx(z[pos]) * np.exp(-0.5 * (u[pos] / sigma) ** 2)
    neg = ~pos
    out[neg] = 0.5 * np.exp(0.5 * (sigma / tau) ** 2 - u[neg] / tau) * erfc(z[neg])
    return out


def _gauss_density(u, sigma):
    return np.exp(-0.5 * (u / sigma) ** 2) / (sigma * SQRT2PI)


def decay_model(irf_sigma: float) -> Model:
    """Parameters ``(t1, amplitude, background, t0)``."""
    sigma = float(irf_sigma)

    def f(x, th):
        tau, amp, bg, t0 = th
        return amp * emg_shape(x - t0, tau, sigma) + bg

    def jac(x, th):
        tau, amp, bg, t0 = th
        u = x - t0
        g = emg_shape(u, tau, sigma)
        if sigma == 0:
            d_tau = g * u / tau**2
            d_u = -g / tau
        else:
            h = _gauss_density(u, sigma)
            d_tau = g * (u / tau**2 - sigma**2 / tau**3) + (sigma / tau) ** 2 * h
            d_u = -g / tau + h
        return np.column_stack([amp * d_tau, g, np.ones_like(x), -amp * d_u])

    return Model(
        ("t1", "amplitude", "background", "t0"), f, jac,
        lower=(1e-300, -np.inf, -np.inf, -np.inf), upper=(np.inf, np.inf, np.inf, np.inf),
    )


# -- damped Rabi oscillation: y = count_scale * (1 - exp(-g*theta) cos(theta)) / 2


def rabi_model(abscissa: str = "amplitude") -> Model:
    """Pulse area ``theta = area_scale * x`` (field amplitude) or ``area_scale * sqrt(x)`` (power)."""
    if abscissa not in ("amplitude", "power"):
        raise ValueError(f"abscissa must be 'amplitude' or 'power', got {abscissa!r}")

    def drive(x):
        return np.sqrt(x) if abscissa == "power" else x

    def f(x, th):
        s, gamma, c = th
        theta = s * drive(x)
        return c * 0.5 * (1.0 - np.exp(-gamma * theta) * np.cos(theta))

    def jac(x, th):
        s, gamma, c = th
        a = drive(x)
        theta = s * a
        e = np.exp(-gamma * theta)
        pe = 0.5 * (1.0 - e * np.cos(theta))
        dpe_dtheta = 0.5 * e * (gamma * np.cos(theta) + np.sin(theta))
        return np.column_stack([c * dpe_dtheta * a, c * 0.5 * theta * e * np.cos(theta), pe])

    return Model(
        ("area_scale", "damping", "count_scale"), f, jac,
        lower=(1e-300, 0.0, 0.0), upper=(np.inf, np.inf, np.inf),
    )


# -- Voigt profile of given area on a flat background


def voigt_profile(x, center, lorentz_fwhm, gauss_fwhm):
    """Area-normalised Voigt line shape (Faddeeva-function evaluation)."""
    x = np.asarray(x, dtype=float)
    gam = 0.5 * lorentz_fwhm
    if gauss_fwhm == 0:
        return gam / math.pi / ((x - center) ** 2 + gam**2)
    sig = gauss_fwhm / FWHM_PER_SIGMA
    z = ((x - center) + 1j * gam) / (sig * SQRT2)
    return wofz(z).real / (sig * SQRT2PI)


def voigt_model() -> Model:
    """Parameters ``(center, lorentz_fwhm, gauss_fwhm, amplitude, background)``; amplitude is the line area."""

    def f(x, th):
        x0, fl, fg, amp, bg = th
        return amp * voigt_profile(x, x0, fl, fg) + bg

    def jac(x, th):
        x0, fl, fg, amp, bg = th
        gam = 0.5 * fl
        if fg == 0:
            d = x - x0
            den = d**2 + gam**2
            v = gam / math.pi / den
            dv_dx0 = 2.0 * d * gam / math.pi / den**2
            dv_dgam = (den - 2.0 * gam**2) / math.pi / den**2
            dv_dfl = 0.5 * dv_dgam
            dv_dfg = np.zeros_like(x)  # the profile is not differentiable in fg at 0
        else:
            sig = fg / FWHM_PER_SIGMA
            c = sig * SQRT2
            z = ((x - x0) + 1j * gam) / c
            w = wofz(z)
            dw = -2.0 * z * w + 2j / math.sqrt(math.pi)
            norm = 1.0 / (sig * SQRT2PI)
            v = w.real * norm
            dv_dx0 = (dw * (-1.0 / c)).real * norm
            dv_dfl = (dw * (0.5j / c)).real * norm
            # z scales as 1/sig; norm as 1/sig
            dv_dsig = (dw * (-z / sig)).real * norm - v / sig
            dv_dfg = dv_dsig / FWHM_PER_SIGMA
        return np.column_stack([amp * dv_dx0, amp * dv_dfl, amp * dv_dfg, v, np.ones_like(x)])

    return Model(
        ("center", "lorentz_fwhm", "gauss_fwhm", "amplitude", "background"), f, jac,
        lower=(-np.inf, 1e-300, 0.0, -np.inf, -np.inf), upper=(np.inf,) * 5,
    )


def voigt_fwhm(lorentz_fwhm: float, gauss_fwhm: float) -> float:
    """Olivero-Longbothum approximation of the Voigt FWHM (about 0.02 % accurate)."""
    return 0.5346 * lorentz_fwhm + math.sqrt(0.2166 * lorentz_fwhm**2 + gauss_fwhm**2)
