"""Seeded Monte Carlo generation of detector time-tag streams.

Three light sources are modelled: a pulsed resonantly driven emitter, a CW
driven emitter (renewal approximation of antibunching) and Poissonian laser
light. All of them pass through the same detector model: efficiency,
Gaussian timing jitter and non-paralyzable dead time.

Randomness is drawn per fixed-size work block from counter-based streams
(see :mod:`rfsqueeze.rng`), so a run is bit-identical for a given seed no
matter how many worker threads are used.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Literal

import numpy as np

from . import rng
from .losschain import LossChain, total_efficiency
from .physics import EmitterParams, PulseDrive, cw_rate, excited_population, max_cw_flux
from .tags import DEFAULT_RESOLUTION, TagStream, apply_dead_time, merge

PULSE_BLOCK = 1 << 22
TAG_BLOCK = 1 << 22
CW_BLOCK = 1 << 20
LASER_BLOCK_SECONDS = 1e-3
# ticks are converted through float64 on the way in
MAX_TICKS = 2**53
MAX_CW_EVENTS = 500_000_000


@dataclass(frozen=True)
class DetectorParams:
    efficiency: float = 1.0
    dead_time: float = 0.0
    jitter_sigma: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency: must be in [0, 1], got {self.efficiency!r}")
        if not self.dead_time >= 0:
            raise ValueError(f"dead_time: must be >= 0, got {self.dead_time!r}")
        if not self.jitter_sigma >= 0:
            raise ValueError(f"jitter_sigma: must be >= 0, got {self.jitter_sigma!r}")


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to reproduce one simulated acquisition.

    ``cw_power``/``p_sat`` are used by ``mode="cw"`` and ``laser_rate`` by
    ``mode="laser"``. When ``hbt_ratio`` is set the detected light is split
    onto two detectors (channels 0 and 1) before dead time is applied.
    """

    mode: Literal["pulsed", "cw", "laser"]
    duration: float
    seed: int
    drive: PulseDrive
    emitter: EmitterParams
    chain: LossChain = field(default_factory=LossChain)
    detector: DetectorParams = field(default_factory=DetectorParams)
    two_photon_prob: float = 0.0
    attenuation: float = 1.0
    cw_power: float = 0.0
    p_sat: float = 1.0
    laser_rate: float = 0.0
    hbt_ratio: float | None = None
    resolution: float = DEFAULT_RESOLUTION

    def __post_init__(self) -> None:
        if self.mode not in ("pulsed", "cw", "laser"):
            raise ValueError(f"mode: must be pulsed, cw or laser, got {self.mode!r}")
        if not self.duration > 0:
            raise ValueError(f"duration: must be > 0, got {self.duration!r}")
        if not 0 <= self.seed < 1 << 64:
            raise ValueError(f"seed: must be an unsigned 64-bit integer, got {self.seed!r}")
        if not 0.0 <= self.two_photon_prob <= 0.5:
            raise ValueError(f"two_photon_prob: must be in [0, 0.5], got {self.two_photon_prob!r}")
        if not self.attenuation >= 1.0:
            raise ValueError(f"attenuation: must be >= 1, got {self.attenuation!r}")
        if self.hbt_ratio is not None and not 0.0 <= self.hbt_ratio <= 1.0:
            raise ValueError(f"hbt_ratio: must be in [0, 1], got {self.hbt_ratio!r}")
        if self.cw_power < 0:
            raise ValueError(f"cw_power: must be >= 0, got {self.cw_power!r}")
        if not self.p_sat > 0:
            raise ValueError(f"p_sat: must be > 0, got {self.p_sat!r}")
        if self.laser_rate < 0:
            raise ValueError(f"laser_rate: must be >= 0, got {self.laser_rate!r}")

    @property
    def survival(self) -> float:
        """Probability that an emitted photon produces a click (before dead time)."""
        return self.emitter.pee * total_efficiency(self.chain) * self.detector.efficiency / self.attenuation

    @property
    def emission_probability(self) -> float:
        return excited_population(self.drive) * self.emitter.qe_espe

    @property
    def click_probability(self) -> float:
        """Mean clicks per pulse in the single-photon part (impurity excluded)."""
        return self.emission_probability * self.survival

    def with_area(self, area: float) -> "SimConfig":
        return replace(self, drive=replace(self.drive, area=area))


def _check_span(duration: float, resolution: float) -> None:
    if duration / resolution > MAX_TICKS:
        raise ValueError(
            f"duration {duration!r} s exceeds the tick range: at most "
            f"{MAX_TICKS * resolution:.6g} s at {resolution!r} s per tick"
        )


def _run_blocks(fn: Callable[[int], np.ndarray], n_blocks: int, workers: int) -> list[np.ndarray]:
    if workers <= 1 or n_blocks <= 1:
        return [fn(b) for b in range(n_blocks)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_blocks)))


def _to_ticks(t: np.ndarray) -> np.ndarray:
    np.rint(t, out=t)
    np.maximum(t, 0.0, out=t)
    return t.astype(np.uint64)


def _sorted_concat(parts: list[np.ndarray]) -> np.ndarray:
    times = np.concatenate(parts) if parts else np.empty(0, np.uint64)
    if times.size > 1 and not np.all(times[1:] >= times[:-1]):
        # only reachable when a delay tail crosses a block boundary
        times.sort(kind="stable")
    return times


def _detect(times: np.ndarray, config: SimConfig) -> TagStream:
    """Channel assignment and dead time for a sorted array of photon arrivals."""
    stream = TagStream.single_channel(times, 0, config.resolution)
    if config.hbt_ratio is not None:
        a, b = split_hbt(stream, config.hbt_ratio, config.seed)
        a = apply_dead_time(a, config.detector.dead_time)
        b = apply_dead_time(b, config.detector.dead_time)
        return merge(a, b)
    return apply_dead_time(stream, config.detector.dead_time)


def n_pulses(config: SimConfig) -> int:
    return int(math.floor(config.duration * config.drive.rep_rate + 1e-9))


def simulate_pulsed(config: SimConfig, workers: int = 1) -> TagStream:
    """Time tags of a pulsed single-photon source.

    Each pulse emits with probability ``P_e * qe_espe``; an emitting pulse
    emits a second photon with probability ``two_photon_prob``. Every photon
    survives independently with :attr:`SimConfig.survival` and is stamped at
    ``pulse epoch + Exp(t1) + N(0, jitter)``.
    """
    if config.mode != "pulsed":
        raise ValueError(f"simulate_pulsed needs mode='pulsed', got {config.mode!r}")
    _check_span(config.duration, config.resolution)
    n = n_pulses(config)
    res = config.resolution
    period_ticks = config.drive.period / res
    t1_ticks = config.emitter.t1 / res
    jitter_ticks = config.detector.jitter_sigma / res
    p_em = config.emission_probability
    s = config.survival
    p1 = p_em * s
    p2 = config.two_photon_prob * s

    def block(b: int) -> np.ndarray:
        start = b * PULSE_BLOCK
        m = min(PULSE_BLOCK, n - start)
        g = rng.block_generator(config.seed, rng.PULSED, b)
        u = g.random(m)
        idx = np.flatnonzero(u < p1)
        if p2 > 0:
            v = g.random(m)
            idx = np.concatenate([idx, np.flatnonzero((u < p_em) & (v < p2))])
        t = (idx + start) * period_ticks
        t += g.exponential(t1_ticks, idx.size)
        if jitter_ticks > 0:
            t += g.normal(0.0, jitter_ticks, idx.size)
        out = _to_ticks(t)
        out.sort()
        return out

    if n == 0 or p1 == 0 and p2 == 0:
        return _detect(np.empty(0, np.uint64), config)
    n_blocks = -(-n // PULSE_BLOCK)
    times = _sorted_concat(_run_blocks(block, n_blocks, workers))
    return _detect(times, config)


def _renewal_scale(mean_interval: float, t1: float) -> float:
    """Mean ``m`` of X ~ Exp(m) such that E[max(X, Y)] = mean_interval for Y ~ Exp(t1)."""
    # E[max] = m + t1 - m t1 / (m + t1)  ->  m^2 + (t1 - D) m + t1^2 - D t1 = 0
    d = mean_interval
    b = t1 - d
    c = t1 * t1 - d * t1
    return 0.5 * (-b + math.sqrt(b * b - 4.0 * c))


def simulate_cw_rf(
    power: float,
    emitter: EmitterParams,
    chain: LossChain,
    detector: DetectorParams,
    duration: float,
    seed: int,
    *,
    p_sat: float,
    attenuation: float = 1.0,
    resolution: float = DEFAULT_RESOLUTION,
) -> TagStream:
    """Time tags of a CW-driven emitter.

    Emission intervals are ``max(X, Y)`` with ``Y ~ Exp(t1)`` a re-excitation
    floor and ``X`` exponential, scaled so that the mean emission rate equals
    ``cw_rate(power, p_sat, 1/(2 t1))``. This reproduces the saturation curve
    and a dip of the interval density at zero delay; it is not a solution of
    the optical Bloch equations.
    """
    config = SimConfig(
        mode="cw", duration=duration, seed=seed, drive=PulseDrive(0.0), emitter=emitter,
        chain=chain, detector=detector, attenuation=attenuation, cw_power=power, p_sat=p_sat,
        resolution=resolution,
    )
    return _simulate_cw(config)


def _simulate_cw(config: SimConfig) -> TagStream:
    _check_span(config.duration, config.resolution)
    emitter = config.emitter
    rate = cw_rate(config.cw_power, config.p_sat, max_cw_flux(emitter.t1))
    s = config.survival
    if rate <= 0 or s <= 0:
        return _detect(np.empty(0, np.uint64), config)
    if rate * config.duration > MAX_CW_EVENTS:
        raise ValueError(
            f"CW run would draw ~{rate * config.duration:.3g} emissions; "
            f"shorten duration below {MAX_CW_EVENTS / rate:.3g} s"
        )
    res = config.resolution
    m = _renewal_scale(1.0 / rate, emitter.t1) / res
    t1_ticks = emitter.t1 / res
    end = config.duration / res
    jitter_ticks = config.detector.jitter_sigma / res
    parts = []
    clock = 0.0
    b = 0
    while clock < end:
        g = rng.block_generator(config.seed, rng.CW, b)
        gaps = np.maximum(g.exponential(m, CW_BLOCK), g.exponential(t1_ticks, CW_BLOCK))
        t = clock + np.cumsum(gaps)
        clock = float(t[-1])
        t = t[t < end]
        t = t[g.random(t.size) < s]
        if jitter_ticks > 0:
            t = t + g.normal(0.0, jitter_ticks, t.size)
        out = _to_ticks(t)
        out.sort()
        parts.append(out)
        b += 1
    return _detect(_sorted_concat(parts), config)


def simulate_laser(
    rate: float,
    duration: float,
    seed: int,
    detector: DetectorParams,
    *,
    resolution: float = DEFAULT_RESOLUTION,
    workers: int = 1,
) -> TagStream:
    """Poissonian (coherent) light of photon rate ``rate`` at the detector.

    Detector efficiency thins the rate; jitter and dead time follow.
    """
    if rate < 0:
        raise ValueError(f"rate: must be >= 0, got {rate!r}")
    config = SimConfig(
        mode="laser", duration=duration, seed=seed, drive=PulseDrive(0.0),
        emitter=_NULL_EMITTER, detector=detector, laser_rate=rate, resolution=resolution,
    )
    return _simulate_laser(config, workers)


def _simulate_laser(config: SimConfig, workers: int = 1) -> TagStream:
    _check_span(config.duration, config.resolution)
    res = config.resolution
    rate = config.laser_rate * config.detector.efficiency / config.attenuation
    if rate <= 0:
        return _detect(np.empty(0, np.uint64), config)
    n_blocks = max(1, math.ceil(config.duration / LASER_BLOCK_SECONDS - 1e-9))
    jitter_ticks = config.detector.jitter_sigma / res

    def block(b: int) -> np.ndarray:
        t0 = b * LASER_BLOCK_SECONDS
        span = min(LASER_BLOCK_SECONDS, config.duration - t0)
        g = rng.block_generator(config.seed, rng.LASER, b)
        k = g.poisson(rate * span)
        t = (t0 + g.random(k) * span) / res
        if jitter_ticks > 0:
            t += g.normal(0.0, jitter_ticks, k)
        out = _to_ticks(t)
        out.sort()
        return out

    times = _sorted_concat(_run_blocks(block, n_blocks, workers))
    return _detect(times, config)


_NULL_EMITTER = EmitterParams(t1=1e-9, t2=1e-9, t_slab=1e-9, q=1.0, q0=1.0, qe_espe=1.0, pee=1.0)


def simulate(config: SimConfig, workers: int = 1) -> TagStream:
    """Dispatch on ``config.mode``."""
    if config.mode == "pulsed":
        return simulate_pulsed(config, workers)
    if config.mode == "cw":
        return _simulate_cw(config)
    return _simulate_laser(config, workers)


def _tag_blocks(stream: TagStream, purpose: int, seed: int, prob: float) -> np.ndarray:
    n = len(stream)
    mask = np.empty(n, dtype=bool)
    for b in range(-(-n // TAG_BLOCK)):
        lo = b * TAG_BLOCK
        hi = min(n, lo + TAG_BLOCK)
        mask[lo:hi] = rng.block_generator(seed, purpose, b).random(hi - lo) < prob
    return mask


def split_hbt(stream: TagStream, ratio: float, seed: int) -> tuple[TagStream, TagStream]:
    """Route each tag to output A (channel 0) with probability ``ratio``, else to B (channel 1)."""
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"ratio: must be in [0, 1], got {ratio!r}")
    to_a = _tag_blocks(stream, rng.SPLIT, seed, ratio)
    a = TagStream(stream.times[to_a], np.zeros(int(to_a.sum()), np.uint8), stream.resolution)
    b = TagStream(stream.times[~to_a], np.ones(int((~to_a).sum()), np.uint8), stream.resolution)
    return a, b


def thin_stream(stream: TagStream, eta: float, seed: int) -> TagStream:
    """Keep each tag independently with probability ``eta``."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta: must be in [0, 1], got {eta!r}")
    keep = _tag_blocks(stream, rng.THIN, seed, eta)
    return TagStream(stream.times[keep], stream.channels[keep], stream.resolution)
