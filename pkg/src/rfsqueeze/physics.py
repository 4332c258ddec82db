"""Closed-form two-level emitter and micropillar cavity relations.

All functions are pure and operate on plain floats (or numpy arrays where
noted). Times are in seconds, rates in 1/s, powers in watts.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np


class PhysicsWarning(UserWarning):
    """Raised when an input is valid but outside the regime a formula targets."""


def _check_probability(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name}: must be in [0, 1], got {value!r}")


def _check_positive(name: str, value: float) -> None:
    if not value > 0.0:
        raise ValueError(f"{name}: must be > 0, got {value!r}")


@dataclass(frozen=True)
class EmitterParams:
    """Emitter and cavity constants.

    ``purcell`` and ``pee`` may be left as ``None``; they are then derived
    from ``t_slab / t1`` and from the extraction-efficiency formula.
    """

    t1: float
    t2: float
    t_slab: float
    q: float
    q0: float
    qe_espe: float
    purcell: float | None = None
    pee: float | None = None

    def __post_init__(self) -> None:
        for name in ("t1", "t2", "t_slab", "q", "q0"):
            _check_positive(name, getattr(self, name))
        if self.t2 > 2.0 * self.t1 * (1.0 + 1e-12):
            raise ValueError(f"t2: must satisfy t2 <= 2*t1, got t2={self.t2!r}, t1={self.t1!r}")
        _check_probability("qe_espe", self.qe_espe)
        if self.purcell is None:
            object.__setattr__(self, "purcell", purcell_factor(self.t_slab, self.t1))
        elif self.purcell < 0:
            raise ValueError(f"purcell: must be >= 0, got {self.purcell!r}")
        if self.pee is None:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", PhysicsWarning)
                pee = extraction_efficiency(self.purcell, self.q, self.q0)
            object.__setattr__(self, "pee", min(pee, 1.0))
        _check_probability("pee", self.pee)

    @property
    def internal_efficiency(self) -> float:
        """Probability that an excitation ends up as a photon in the collected mode."""
        return self.qe_espe * self.pee


@dataclass(frozen=True)
class PulseDrive:
    """Resonant pulse train: pulse area (rad), area damping (1/rad), repetition rate (Hz)."""

    area: float
    damping: float = 0.0
    rep_rate: float = 76e6

    def __post_init__(self) -> None:
        if not self.area >= 0:
            raise ValueError(f"area: must be >= 0, got {self.area!r}")
        if not self.damping >= 0:
            raise ValueError(f"damping: must be >= 0, got {self.damping!r}")
        _check_positive("rep_rate", self.rep_rate)

    @property
    def period(self) -> float:
        return 1.0 / self.rep_rate


def rabi_population(area, damping=0.0):
    """Excited-state population after a pulse of the given area.

    ``P_e = (1 - exp(-damping*area) * cos(area)) / 2``; reduces to
    ``sin(area/2)**2`` without damping and relaxes to 1/2 for strong damping.
    Accepts scalars or arrays.
    """
    area = np.asarray(area, dtype=float)
    pe = 0.5 * (1.0 - np.exp(-damping * area) * np.cos(area))
    return float(pe) if pe.ndim == 0 else pe


def excited_population(drive: PulseDrive) -> float:
    return rabi_population(drive.area, drive.damping)


def cw_rate(power, p_sat: float, i_inf: float):
    """Two-level saturation curve ``i_inf * P / (P + p_sat)``."""
    if not p_sat > 0:
        raise ValueError(f"p_sat: must be > 0, got {p_sat!r}")
    if i_inf < 0:
        raise ValueError(f"i_inf: must be >= 0, got {i_inf!r}")
    power = np.asarray(power, dtype=float)
    if np.any(power < 0):
        raise ValueError("power: must be >= 0")
    rate = i_inf * power / (power + p_sat)
    return float(rate) if rate.ndim == 0 else rate


def max_cw_flux(t1: float) -> float:
    """Upper bound on CW resonance-fluorescence flux: half population decaying at 1/t1."""
    _check_positive("t1", t1)
    return 1.0 / (2.0 * t1)


def cw_efficiency(i_inf: float, t1: float) -> float:
    """Fraction of the saturated emission flux that is detected."""
    return i_inf / max_cw_flux(t1)


def purcell_factor(t_slab: float, t1: float) -> float:
    """Lifetime ratio between the bulk (slab) emitter and the cavity-coupled emitter."""
    _check_positive("t_slab", t_slab)
    _check_positive("t1", t1)
    return t_slab / t1


def extraction_efficiency(f_p: float, q: float, q0: float) -> float:
    """Fraction of emission funnelled into the fundamental cavity mode.

    ``f_p / (f_p + 1) * q / q0``. Emits a :class:`PhysicsWarning` when
    ``q > q0``, where the expression is no longer a probability.
    """
    if f_p < 0:
        raise ValueError(f"f_p: must be >= 0, got {f_p!r}")
    _check_positive("q", q)
    _check_positive("q0", q0)
    if q > q0:
        warnings.warn(f"q/q0 = {q / q0:.4g} > 1: extraction efficiency is nonphysical", PhysicsWarning)
    if math.isinf(f_p):
        return q / q0
    return f_p / (f_p + 1.0) * q / q0


def fourier_fraction(t2: float, t1: float) -> float:
    """Coherence relative to the transform limit, ``t2 / (2 t1)``."""
    _check_positive("t1", t1)
    _check_positive("t2", t2)
    frac = t2 / (2.0 * t1)
    if frac > 1.0 + 1e-12:
        warnings.warn(f"t2/(2 t1) = {frac:.4g} exceeds the transform limit", PhysicsWarning)
    return frac


def t2_from_linewidth(lorentzian_fwhm: float, *, deconvolved: bool = True) -> float:
    """Coherence time of a Lorentzian line, ``1 / (pi * fwhm)``.

    The width must be the homogeneous (Lorentzian) component with the
    instrument Gaussian removed. Passing ``deconvolved=False`` still returns
    the value but warns, since a raw Voigt width overstates the line and
    biases T2 low.
    """
    _check_positive("lorentzian_fwhm", lorentzian_fwhm)
    if not deconvolved:
        warnings.warn(
            "linewidth includes the instrument response; T2 from a raw Voigt FWHM is biased",
            PhysicsWarning,
        )
    return 1.0 / (math.pi * lorentzian_fwhm)
