"""JSON configuration: schema validation and conversion to domain objects."""

from __future__ import annotations

import json
import math
from functools import lru_cache
from importlib import resources
from typing import Any

import jsonschema

from .losschain import LossChain
from .physics import EmitterParams, PulseDrive
from .simulate import DetectorParams, SimConfig


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("rfsqueeze").joinpath("schemas", f"{name}.schema.json").read_text()
    schema = json.loads(text)
    if name == "simconfig":
        schema["properties"]["chain"] = load_schema("chain")
    return schema


def _validate(data: Any, schema_name: str) -> None:
    validator = jsonschema.Draft202012Validator(load_schema(schema_name))
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = ".".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {e.message}")


def _build(field: str, fn, **kwargs):
    try:
        return fn(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{field}.{exc}") from None


def chain_from_dict(data: dict) -> LossChain:
    _validate(data, "chain")
    return LossChain.from_dict(data)


def internal_efficiency_from_dict(data: dict) -> float | None:
    """``rho`` from a chain document: explicit ``rho`` or ``qe_espe * pee``."""
    if "rho" in data:
        return float(data["rho"])
    if "qe_espe" in data and "pee" in data:
        return float(data["qe_espe"]) * float(data["pee"])
    return None


def simconfig_from_dict(data: dict) -> SimConfig:
    _validate(data, "simconfig")
    drive = _build("drive", PulseDrive, **data["drive"])
    emitter = _build("emitter", EmitterParams, **data["emitter"])
    chain = LossChain.from_dict(data.get("chain", {"stages": []}))
    detector = _build("detector", DetectorParams, **data.get("detector", {}))
    cw = data.get("cw", {})
    laser = data.get("laser", {})
    kwargs = dict(
        mode=data.get("mode", "pulsed"),
        duration=float(data["duration"]),
        seed=int(data["seed"]),
        drive=drive,
        emitter=emitter,
        chain=chain,
        detector=detector,
        two_photon_prob=float(data.get("two_photon_prob", 0.0)),
        attenuation=float(data.get("attenuation", 1.0)),
        cw_power=float(cw.get("power", 0.0)),
        p_sat=float(cw.get("p_sat", 1.0)),
        laser_rate=float(laser.get("rate", 0.0)),
        hbt_ratio=data.get("hbt_ratio"),
        resolution=int(data.get("resolution_ps", 1)) * 1e-12,
    )
    try:
        return SimConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def simconfig_to_dict(cfg: SimConfig) -> dict:
    e = cfg.emitter
    out = {
        "mode": cfg.mode,
        "duration": cfg.duration,
        "seed": cfg.seed,
        "drive": {"area": cfg.drive.area, "damping": cfg.drive.damping, "rep_rate": cfg.drive.rep_rate},
        "emitter": {
            "t1": e.t1, "t2": e.t2, "t_slab": e.t_slab, "purcell": e.purcell,
            "q": e.q, "q0": e.q0, "qe_espe": e.qe_espe, "pee": e.pee,
        },
        "chain": cfg.chain.to_dict(),
        "detector": {
            "efficiency": cfg.detector.efficiency,
            "dead_time": cfg.detector.dead_time,
            "jitter_sigma": cfg.detector.jitter_sigma,
        },
        "two_photon_prob": cfg.two_photon_prob,
        "attenuation": cfg.attenuation,
        "hbt_ratio": cfg.hbt_ratio,
        "resolution_ps": round(cfg.resolution / 1e-12),
    }
    if cfg.mode == "cw":
        out["cw"] = {"power": cfg.cw_power, "p_sat": cfg.p_sat}
    if cfg.mode == "laser":
        out["laser"] = {"rate": cfg.laser_rate}
    return out


def load_json(path) -> Any:
    with open(path) as fh:
        return json.load(fh)


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):
        return _clean(obj.item())
    return obj


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, non-finite floats as null."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"
