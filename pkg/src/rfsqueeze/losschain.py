"""Efficiency budgets and photon-number statistics under binomial loss."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Literal

_PHYSICAL_FLOOR_TOL = 1e-12


class UnphysicalError(ValueError):
    """Measured statistics cannot be produced by any upstream source."""


@dataclass(frozen=True)
class Stage:
    name: str
    efficiency: float

    def __post_init__(self) -> None:
        if not 0.0 < self.efficiency <= 1.0:
            raise ValueError(f"stage {self.name!r}: efficiency must be in (0, 1], got {self.efficiency!r}")


@dataclass(frozen=True)
class LossChain:
    """Ordered efficiency stages between the emitter and the detector."""

    stages: tuple[Stage, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "stages", tuple(s if isinstance(s, Stage) else Stage(*s) for s in self.stages)
        )

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, float]]) -> "LossChain":
        return cls(tuple(Stage(n, float(e)) for n, e in pairs))

    @classmethod
    def from_dict(cls, data: dict) -> "LossChain":
        return cls(tuple(Stage(str(s["name"]), float(s["efficiency"])) for s in data.get("stages", [])))

    def to_dict(self) -> dict:
        return {"stages": [{"name": s.name, "efficiency": s.efficiency} for s in self.stages]}

    @property
    def efficiencies(self) -> list[float]:
        return [s.efficiency for s in self.stages]

    def cumulative(self) -> list[tuple[str, float]]:
        """Running product after each stage, in chain order."""
        out, acc = [], 1.0
        for s in self.stages:
            acc *= s.efficiency
            out.append((s.name, acc))
        return out


def total_efficiency(chain: LossChain) -> float:
    return math.prod(chain.efficiencies)


@dataclass(frozen=True)
class SqueezingPrediction:
    rho: float
    t_ext: float
    sigma_ratio: float
    db: float


def predicted_sigma_ratio(rho: float, t_ext: float) -> float:
    """Noise of a lossy single-photon source relative to shot noise, ``sqrt(1 - rho*t_ext)``.

    ``rho`` is the internal efficiency (emission into the collected mode per
    pulse) and ``t_ext`` the external transmission including detection.
    """
    for name, v in (("rho", rho), ("t_ext", t_ext)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name}: must be in [0, 1], got {v!r}")
    return math.sqrt(1.0 - rho * t_ext)


def squeezing_db(sigma_ratio: float, convention: Literal["sigma", "variance"] = "sigma") -> float:
    """Squeezing in decibels.

    ``convention="sigma"`` (default) gives ``-10 log10(sigma_ratio)``, the
    amplitude-ratio convention that matches the usual quotes for resonance
    fluorescence (0.8732 -> 0.59 dB). ``convention="variance"`` gives
    ``-10 log10(sigma_ratio**2)``, i.e. the Fano factor in dB.
    """
    if not sigma_ratio > 0:
        raise ValueError(f"sigma_ratio: must be > 0, got {sigma_ratio!r}")
    if convention == "sigma":
        return -10.0 * math.log10(sigma_ratio)
    if convention == "variance":
        return -20.0 * math.log10(sigma_ratio)
    raise ValueError(f"unknown dB convention {convention!r}")


def predict(rho: float, t_ext: float) -> SqueezingPrediction:
    ratio = predicted_sigma_ratio(rho, t_ext)
    db = squeezing_db(ratio) if ratio > 0 else math.inf
    return SqueezingPrediction(rho=rho, t_ext=t_ext, sigma_ratio=ratio, db=db)


def thin_fano(fano_in: float, eta: float) -> float:
    """Fano factor after independent survival of each photon with probability ``eta``."""
    if fano_in < 0:
        raise ValueError(f"fano_in: must be >= 0, got {fano_in!r}")
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta: must be in (0, 1], got {eta!r}")
    return 1.0 - eta * (1.0 - fano_in)


def unfold_fano(fano_meas: float, eta_downstream: float) -> float:
    """Invert :func:`thin_fano`: the Fano factor before a loss of ``eta_downstream``."""
    if not 0.0 < eta_downstream <= 1.0:
        raise ValueError(f"eta_downstream: must be in (0, 1], got {eta_downstream!r}")
    fano = 1.0 - (1.0 - fano_meas) / eta_downstream
    if fano < -_PHYSICAL_FLOOR_TOL:
        raise UnphysicalError(
            f"unphysical: measured statistics imply negative upstream Fano ({fano:.6g}); "
            f"fano_meas must be >= 1 - eta_downstream = {1.0 - eta_downstream:.6g}"
        )
    return max(fano, 0.0)


def budget_table(chain: LossChain, rho: float) -> list[dict]:
    """Predicted squeezing at every plane of the chain.

    The first row is the plane before any stage (external efficiency 1);
    each subsequent row is after the named stage.
    """
    rows = []
    planes = [("source", 1.0)] + chain.cumulative()
    for name, t in planes:
        p = predict(rho, t)
        rows.append(
            {
                "plane": name,
                "t_ext": t,
                "rho_t": rho * t,
                "sigma_ratio": p.sigma_ratio,
                "db": p.db,
                "fano": p.sigma_ratio**2,
            }
        )
    return rows
