"""Simulation and photon-counting statistics for pulsed resonance-fluorescence single-photon sources."""

from .losschain import LossChain, Stage
from .physics import EmitterParams, PulseDrive
from .simulate import DetectorParams, SimConfig, simulate
from .tags import TagStream

__version__ = "0.1.0"

__all__ = ["DetectorParams", "EmitterParams", "LossChain", "PulseDrive", "SimConfig", "Stage", "TagStream", "simulate"]
