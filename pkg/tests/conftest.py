import math

import pytest

from rfsqueeze import DetectorParams, EmitterParams, LossChain, PulseDrive, SimConfig

SETUP_CHAIN = [
    ("first lens", 0.78),
    ("optical path", 0.83),
    ("polarization filter", 0.55),
    ("single-mode fibre", 0.74),
    ("detector", 0.86),
]


@pytest.fixture
def emitter():
    # ideal internal efficiency so the configured chain fixes the click probability
    return EmitterParams(t1=58.6e-12, t2=108.8e-12, t_slab=1.08e-9, q=6800, q0=7600, qe_espe=1.0, pee=1.0)


@pytest.fixture
def setup_chain():
    return LossChain.from_pairs(SETUP_CHAIN)


def pulsed_config(emitter, *, survival=0.226, duration=0.01, seed=1, area=math.pi, damping=0.0,
                  dead_time=0.0, jitter=0.0, two_photon_prob=0.0, hbt_ratio=None):
    return SimConfig(
        mode="pulsed",
        duration=duration,
        seed=seed,
        drive=PulseDrive(area, damping, 76e6),
        emitter=emitter,
        chain=LossChain.from_pairs([("setup", survival)]) if survival < 1 else LossChain(),
        detector=DetectorParams(1.0, dead_time, jitter),
        two_photon_prob=two_photon_prob,
        hbt_ratio=hbt_ratio,
    )
