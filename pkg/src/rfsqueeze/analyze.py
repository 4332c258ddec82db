"""Statistics over time-tag streams.

Binning and histogramming work in fixed-size chunks so partial results can
be summed; results do not depend on the chunking.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .losschain import squeezing_db
from .simulate import SimConfig, simulate_pulsed
from .tags import TagStream, UnsortedStreamError

CHUNK = 1 << 22
MIN_EXPECTED = 5.0
G2_SIDE_PEAKS = 10
G2_SKIP = 1


class InsufficientStatisticsError(ValueError):
    pass


@dataclass(frozen=True)
class BinnedCounts:
    bin_width: float
    counts: np.ndarray
    n_pulses_per_bin: int | None = None

    def __post_init__(self) -> None:
        if not self.bin_width > 0:
            raise ValueError(f"bin_width: must be > 0, got {self.bin_width!r}")
        object.__setattr__(self, "counts", np.asarray(self.counts, dtype=np.int64))

    def __len__(self) -> int:
        return int(self.counts.size)


@dataclass(frozen=True)
class SqueezingReport:
    mean: float
    sigma: float
    shot_sigma: float
    sigma_ratio: float
    db: float
    fano: float
    binomial_p: float | None
    binomial_gof_p: float | None
    n_bins: int
    fano_se: float
    sigma_ratio_se: float

    def to_dict(self) -> dict:
        return asdict(self)


def _ticks(value_seconds: float, resolution: float) -> float:
    return value_seconds / resolution


def bin_counts(
    stream: TagStream,
    bin_width: float,
    *,
    duration: float | None = None,
    start: float = 0.0,
    n_pulses_per_bin: int | None = None,
) -> BinnedCounts:
    """Count tags in consecutive bins ``[start + i w, start + (i+1) w)``.

    The covered span ends at ``duration`` (seconds from zero) or, if not
    given, at the last tag; a trailing partial bin is dropped.
    """
    if not bin_width > 0:
        raise ValueError(f"bin_width: must be > 0, got {bin_width!r}")
    if not stream.is_sorted:
        raise UnsortedStreamError("bin_counts requires a time-sorted stream")
    res = stream.resolution
    if duration is None:
        if len(stream) == 0:
            return BinnedCounts(bin_width, np.zeros(0, np.int64), n_pulses_per_bin)
        duration = (int(stream.times[-1]) + 1) * res
    n_bins = int(math.floor((duration - start) / bin_width + 1e-9))
    n_bins = max(n_bins, 0)
    w = _ticks(bin_width, res)
    w_int = round(w)
    exact = abs(w - w_int) < 1e-9 and w_int > 0
    t0 = round(_ticks(start, res))
    counts = np.zeros(n_bins, np.int64)
    times = stream.times
    for lo in range(0, times.size, CHUNK):
        t = times[lo : lo + CHUNK].astype(np.int64) - t0
        t = t[t >= 0]
        idx = t // w_int if exact else np.floor(t / w).astype(np.int64)
        idx = idx[idx < n_bins]
        counts += np.bincount(idx, minlength=n_bins)[:n_bins]
    return BinnedCounts(bin_width, counts, n_pulses_per_bin)


def fano_standard_error(counts: np.ndarray) -> float:
    """Delta-method standard error of the Fano factor estimate ``s^2 / mean``."""
    x = np.asarray(counts, dtype=np.float64)
    n = x.size
    mu = x.mean()
    d = x - mu
    m2 = np.mean(d**2)
    m3 = np.mean(d**3)
    m4 = np.mean(d**4)
    var_s2 = (m4 - m2**2) / n
    var_mu = m2 / n
    cov = m3 / n
    var_f = var_s2 / mu**2 + m2**2 * var_mu / mu**4 - 2.0 * m2 * cov / mu**3
    return float(math.sqrt(max(var_f, 0.0)))


def squeezing_stats(binned: BinnedCounts) -> SqueezingReport:
    """Mean, sample standard deviation (N-1), shot-noise comparison and Fano factor."""
    c = binned.counts
    if c.size < 2:
        raise InsufficientStatisticsError(f"need at least 2 bins, got {c.size}")
    mean = float(c.mean())
    if mean <= 0:
        raise InsufficientStatisticsError("no signal: mean count per bin is zero")
    sigma = float(c.std(ddof=1))
    report = report_from_moments(mean, sigma, c.size, fano_se=fano_standard_error(c))
    if binned.n_pulses_per_bin:
        p_hat, gof = fit_binomial(binned)
        report = SqueezingReport(**{**asdict(report), "binomial_p": p_hat, "binomial_gof_p": gof})
    return report


def report_from_moments(mean: float, sigma: float, n_bins: int = 0, fano_se: float = math.nan) -> SqueezingReport:
    """Squeezing metrics from a mean and standard deviation of counts per bin."""
    shot = math.sqrt(mean)
    ratio = sigma / shot
    fano = sigma * sigma / mean
    db = squeezing_db(ratio) if ratio > 0 else math.inf
    ratio_se = fano_se / (2.0 * ratio) if ratio > 0 else math.nan
    return SqueezingReport(
        mean=mean, sigma=sigma, shot_sigma=shot, sigma_ratio=ratio, db=db, fano=fano,
        binomial_p=None, binomial_gof_p=None, n_bins=int(n_bins), fano_se=fano_se,
        sigma_ratio_se=ratio_se,
    )


def _pool_cells(observed: np.ndarray, expected: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Merge adjacent cells left to right until each carries >= MIN_EXPECTED expected counts."""
    obs, exp = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= MIN_EXPECTED:
            obs.append(acc_o)
            exp.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 or acc_o > 0:
        if exp:
            obs[-1] += acc_o
            exp[-1] += acc_e
        else:
            obs.append(acc_o)
            exp.append(acc_e)
    return np.array(obs), np.array(exp)


def count_histogram(counts: np.ndarray, n_max: int | None = None) -> np.ndarray:
    c = np.asarray(counts, dtype=np.int64)
    n_max = int(c.max()) if n_max is None else n_max
    return np.bincount(c, minlength=n_max + 1)


def fit_binomial(binned: BinnedCounts) -> tuple[float, float]:
    """Binomial MLE ``p = mean / n`` and the chi-square goodness-of-fit p-value.

    Cells with expected occupancy below 5 are pooled with their neighbours;
    one degree of freedom is spent on ``p``.
    """
    n = binned.n_pulses_per_bin
    if not n:
        raise ValueError("fit_binomial needs n_pulses_per_bin")
    c = binned.counts
    if c.size == 0:
        raise InsufficientStatisticsError("no bins")
    if c.max() > n:
        raise ValueError(f"counts exceed pulse slots: max count {int(c.max())} > {n}")
    p_hat = float(c.mean() / n)
    observed = count_histogram(c, n)
    expected = c.size * stats.binom.pmf(np.arange(n + 1), n, p_hat)
    obs, exp = _pool_cells(observed, expected)
    chi2 = float(np.sum((obs - exp) ** 2 / exp))
    dof = obs.size - 2
    if dof < 1:
        return p_hat, 1.0 if chi2 < 1e-9 else math.nan
    return p_hat, float(stats.chi2.sf(chi2, dof))


def histogram_rows(binned: BinnedCounts) -> list[dict]:
    """One row per count value: observed occurrences and binomial / Poisson expectations."""
    c = binned.counts
    mean = float(c.mean()) if c.size else 0.0
    n_max = max(int(c.max()) if c.size else 0, binned.n_pulses_per_bin or 0)
    k = np.arange(n_max + 1)
    observed = count_histogram(c, n_max)
    poisson = c.size * stats.poisson.pmf(k, mean)
    rows = []
    binom = None
    if binned.n_pulses_per_bin:
        n = binned.n_pulses_per_bin
        binom = c.size * stats.binom.pmf(k, n, mean / n)
    for i in range(n_max + 1):
        row = {"count": int(k[i]), "observed": int(observed[i]), "poisson": float(poisson[i])}
        if binom is not None:
            row["binomial"] = float(binom[i])
        rows.append(row)
    return rows


def g2_peaks(a: TagStream, b: TagStream, period: float, window: float, max_peak: int) -> np.ndarray:
    """Coincidences with ``t_b - t_a`` within ``window`` of ``k * period`` for ``k = -max_peak..max_peak``.

    Window edges are inclusive on both sides, which makes the histogram
    mirror exactly when the streams are swapped.
    """
    if a.resolution != b.resolution:
        raise ValueError("streams must share a resolution")
    if not a.is_sorted or not b.is_sorted:
        raise UnsortedStreamError("g2 requires time-sorted streams")
    if not 0 < window < period / 2:
        raise ValueError(f"window must be in (0, period/2), got window={window!r}, period={period!r}")
    res = a.resolution
    tb = b.times.astype(np.int64)
    out = np.zeros(2 * max_peak + 1, dtype=np.int64)
    for j, k in enumerate(range(-max_peak, max_peak + 1)):
        lo = math.ceil((k * period - window) / res - 1e-9)
        hi = math.floor((k * period + window) / res + 1e-9)
        total = 0
        for s in range(0, len(a), CHUNK):
            ta = a.times[s : s + CHUNK].astype(np.int64)
            total += int(np.sum(np.searchsorted(tb, ta + hi, "right") - np.searchsorted(tb, ta + lo, "left")))
        out[j] = total
    return out


def g2_zero_pulsed(
    a: TagStream,
    b: TagStream,
    period: float,
    window: float,
    *,
    n_side: int = G2_SIDE_PEAKS,
    skip: int = G2_SKIP,
) -> float:
    """Pulsed g2(0): zero-delay peak area over the mean side-peak area.

    Side peaks ``skip+1 .. skip+n_side`` on both sides form the baseline.
    """
    max_peak = skip + n_side
    peaks = g2_peaks(a, b, period, window, max_peak)
    center = peaks[max_peak]
    ks = np.arange(-max_peak, max_peak + 1)
    side = peaks[np.abs(ks) > skip]
    if side.sum() == 0:
        raise InsufficientStatisticsError("insufficient statistics: no side-peak coincidences")
    return float(center / side.mean())


@dataclass(frozen=True)
class DecayHistogram:
    edges: np.ndarray  # seconds
    counts: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])


def decay_histogram(
    stream: TagStream,
    period: float,
    n_bins: int,
    *,
    start: float = 0.0,
    span: float | None = None,
) -> DecayHistogram:
    """Histogram of tag times folded modulo the pulse period.

    Delays are mapped into ``[start, start + period)``; a negative
    ``start`` keeps early (jittered) arrivals next to the pulse instead of
    wrapping them to the end of the period. Only ``[start, start + span)``
    is binned.
    """
    if not period > 0:
        raise ValueError(f"period: must be > 0, got {period!r}")
    span = period if span is None else span
    if not 0 < span <= period:
        raise ValueError("span must be in (0, period]")
    res = stream.resolution
    p = period / res
    s0 = start / res
    edges_ticks = np.linspace(s0, s0 + span / res, n_bins + 1)
    counts = np.zeros(n_bins, np.int64)
    for lo in range(0, len(stream), CHUNK):
        t = stream.times[lo : lo + CHUNK].astype(np.float64)
        phase = np.mod(t - s0, p) + s0
        h, _ = np.histogram(phase, bins=edges_ticks)
        counts += h
    return DecayHistogram(edges_ticks * res, counts)


@dataclass(frozen=True)
class SweepPoint:
    area: float
    sigma_ratio: float
    sigma_ratio_se: float
    mean: float


def sweep_squeezing(
    base: SimConfig,
    amplitudes,
    bin_width: float = 1e-6,
    workers: int = 1,
) -> list[SweepPoint]:
    """Squeezing versus pulse area, one simulation per area with the base seed.

    Reusing the seed means every area sees the same random numbers, so the
    curve is smooth and neighbouring points are strongly correlated.
    """
    amplitudes = list(amplitudes)
    if not amplitudes:
        raise ValueError("amplitudes must be non-empty")
    n_per_bin = bin_width * base.drive.rep_rate
    n_per_bin = round(n_per_bin) if abs(n_per_bin - round(n_per_bin)) < 1e-6 else None
    out = []
    for area in amplitudes:
        cfg = base.with_area(float(area))
        stream = simulate_pulsed(cfg, workers)
        binned = bin_counts(stream, bin_width, duration=base.duration, n_pulses_per_bin=n_per_bin)
        if binned.counts.sum() == 0:
            out.append(SweepPoint(float(area), 1.0, math.nan, 0.0))
            continue
        r = squeezing_stats(BinnedCounts(bin_width, binned.counts))
        out.append(SweepPoint(float(area), r.sigma_ratio, r.sigma_ratio_se, r.mean))
    return out
