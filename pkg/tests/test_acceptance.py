"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line."""

import itertools
import math
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import brentq

from rfsqueeze.analyze import (
    BinnedCounts,
    bin_counts,
    fano_standard_error,
    fit_binomial,
    g2_zero_pulsed,
    squeezing_stats,
    sweep_squeezing,
)
from rfsqueeze.fitting import fit_exp_decay, fit_rabi, fit_saturation, fit_voigt
from rfsqueeze.losschain import LossChain, predicted_sigma_ratio, squeezing_db, thin_fano, unfold_fano
from rfsqueeze.physics import EmitterParams, PulseDrive, cw_efficiency, extraction_efficiency, purcell_factor
from rfsqueeze.simulate import DetectorParams, SimConfig, simulate_laser, simulate_pulsed, split_hbt, thin_stream
from rfsqueeze.tagio import encode, read_tags, write_tags
from rfsqueeze.tags import TagStream

import forward
from test_fitting import JACOBIAN_CASES, numeric_jacobian

pytestmark = pytest.mark.slow

REP = 76e6
PERIOD = 1 / REP
CLICK = 0.226
DET_EFF = 0.86
G2_TARGET = 0.025

EMITTER = EmitterParams(t1=58.6e-12, t2=108.8e-12, t_slab=1.08e-9, q=6800, q0=7600, qe_espe=1.0, pee=1.0)


def config(seed, *, duration=1.0, dead_time=0.0, jitter=0.0, two_photon_prob=0.0, area=math.pi, hbt_ratio=None):
    """Pi-pulse source whose detected click probability per pulse is 0.226."""
    return SimConfig(
        mode="pulsed",
        duration=duration,
        seed=seed,
        drive=PulseDrive(area, 0.0, REP),
        emitter=EMITTER,
        chain=LossChain.from_pairs([("collection", CLICK / DET_EFF)]),
        detector=DetectorParams(DET_EFF, dead_time, jitter),
        two_photon_prob=two_photon_prob,
        hbt_ratio=hbt_ratio,
    )


def squeeze(stream, duration, n_per_bin=None):
    return squeezing_stats(bin_counts(stream, 1e-6, duration=duration, n_pulses_per_bin=n_per_bin))


def g2_oracle(p_em, eps, survival, ratio):
    """g2(0) by enumerating the fate of every photon of a pulse (lost, detector A, detector B)."""
    fates = {"lost": 1 - survival, "a": survival * ratio, "b": survival * (1 - ratio)}
    photons = {0: 1 - p_em, 1: p_em * (1 - eps), 2: p_em * eps}
    e_a = e_b = e_ab = 0.0
    for n, pn in photons.items():
        for combo in itertools.product(fates, repeat=n):
            p = pn * math.prod(fates[f] for f in combo)
            na, nb = combo.count("a"), combo.count("b")
            e_a += p * na
            e_b += p * nb
            e_ab += p * na * nb
    return e_ab / (e_a * e_b)


def impurity_for(target, p_em=1.0):
    return brentq(lambda e: g2_oracle(p_em, e, CLICK, 0.5) - target, 1e-9, 0.5, xtol=1e-15)


def verdict(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_criterion_01_pi_pulse_end_to_end(capsys):
    t0 = time.perf_counter()
    r = squeeze(simulate_pulsed(config(1)), 1.0)
    elapsed = time.perf_counter() - t0
    target = math.sqrt(1 - CLICK)
    ok = abs(r.mean - 17.2) <= 0.2 and abs(r.sigma_ratio - target) <= 0.005 and elapsed < 60
    verdict(capsys, 1, ok, f"mean {r.mean:.4f}/us, ratio {r.sigma_ratio:.5f} (target {target:.4f}), {elapsed:.1f} s")


def test_criterion_02_dead_time(capsys):
    eps = impurity_for(G2_TARGET)
    base = squeeze(simulate_pulsed(config(2, two_photon_prob=eps)), 1.0)
    dead = squeeze(simulate_pulsed(config(2, two_photon_prob=eps, dead_time=5e-9, jitter=20e-12)), 1.0)
    drop = base.sigma_ratio - dead.sigma_ratio
    ok = 0 < drop <= 0.01 and 0.865 <= dead.sigma_ratio <= 0.880
    verdict(capsys, 2, ok, f"ratio {base.sigma_ratio:.5f} -> {dead.sigma_ratio:.5f} (drop {drop:.5f}), impurity {eps:.5f}")


def test_criterion_03_laser_control(capsys):
    r = squeeze(simulate_laser(17.2e6, 1.0, 3, DetectorParams()), 1.0)
    ok = abs(r.sigma_ratio - 1.0) <= 0.005
    verdict(capsys, 3, ok, f"ratio {r.sigma_ratio:.5f}, mean {r.mean:.3f}/us")


def test_criterion_04_closed_form(capsys):
    checks = {
        "extraction": (extraction_efficiency(18.4, 6800, 7600), 0.8486, 1e-4),
        "purcell": (purcell_factor(1.08e-9, 58.60e-12), 18.43, 0.01),
        "cw efficiency": (cw_efficiency(1.87e9, 58.60e-12), 0.219, 0.001),
        "dB measured": (squeezing_db(0.8732), 0.589, 0.001),
        "dB first lens": (squeezing_db(predicted_sigma_ratio(0.782, 1.0)), 3.31, 0.03),
    }
    bad = [k for k, (v, t, tol) in checks.items() if not abs(v - t) <= tol]
    detail = ", ".join(f"{k} {v:.5g}" for k, (v, _, _) in checks.items())
    verdict(capsys, 4, not bad, detail + (f"; failed: {bad}" if bad else ""))


def _stream_with_fano(g, fano, n_bins, mean=20.0):
    if fano < 1 - 1e-9:
        p = 1 - fano
        counts = g.binomial(math.ceil(mean / p), p, n_bins)
    elif fano > 1 + 1e-9:
        r = mean / (fano - 1)
        counts = g.negative_binomial(r, r / (r + mean), n_bins)
    else:
        counts = g.poisson(mean, n_bins)
    w = 1_000_000
    times = np.repeat(np.arange(n_bins, dtype=np.int64) * w, counts) + g.integers(0, w, int(counts.sum()))
    return TagStream.single_channel(np.sort(times).astype(np.uint64))


def test_criterion_05_thinning_law(capsys):
    g = np.random.default_rng(5)
    n_bins = 20_000
    worst = 0.0
    fails = []
    identity_err = 0.0
    for i in range(50):
        fano = float(g.uniform(0.0, 1.5))
        eta = float(g.uniform(0.05, 1.0))
        thinned = thin_stream(_stream_with_fano(g, fano, n_bins), eta, seed=1000 + i)
        c = bin_counts(thinned, 1e-6, duration=n_bins * 1e-6).counts
        est = c.var(ddof=1) / c.mean()
        z = abs(est - thin_fano(fano, eta)) / fano_standard_error(c)
        worst = max(worst, z)
        if not z <= 3:
            fails.append((round(fano, 3), round(eta, 3), round(z, 2)))
        identity_err = max(identity_err, abs(unfold_fano(thin_fano(fano, eta), eta) - fano))
    ok = not fails and identity_err <= 1e-12
    verdict(capsys, 5, ok, f"max |z| {worst:.2f} over 50 pairs, unfold*thin error {identity_err:.1e}" + (f"; outside 3 SE: {fails}" if fails else ""))


def test_criterion_06_binomial_statistics(capsys):
    pvals = []
    for seed in range(100, 120):
        binned = bin_counts(simulate_pulsed(config(seed)), 1e-6, duration=1.0, n_pulses_per_bin=76)
        pvals.append(fit_binomial(binned)[1])
    passed = sum(p > 0.01 for p in pvals)
    sigma_model = math.sqrt(76 * 0.230 * (1 - 0.230))
    ok = passed >= 19 and abs(sigma_model - 3.67) < 0.005 and sigma_model > 3.65
    verdict(capsys, 6, ok, f"{passed}/20 seeds pass GOF at 1% (min p {min(pvals):.3g}); model sigma at p=0.230 is {sigma_model:.4f}")


def test_criterion_07_g2(capsys):
    duration = 0.5
    pure = simulate_pulsed(config(7, duration=duration, hbt_ratio=0.5))
    g2_pure = g2_zero_pulsed(pure.select(0), pure.select(1), PERIOD, 2e-9)

    eps = impurity_for(G2_TARGET)
    oracle = g2_oracle(1.0, eps, CLICK, 0.5)
    dirty = simulate_pulsed(config(7, duration=duration, hbt_ratio=0.5, two_photon_prob=eps))
    g2_dirty = g2_zero_pulsed(dirty.select(0), dirty.select(1), PERIOD, 2e-9)

    laser = simulate_laser(17.2e6, duration, 7, DetectorParams())
    a, b = split_hbt(laser, 0.5, 7)
    g2_laser = g2_zero_pulsed(a, b, PERIOD, 2e-9)

    ok = g2_pure < 0.005 and abs(g2_dirty - G2_TARGET) <= 0.2 * G2_TARGET and abs(g2_laser - 1) <= 0.02
    verdict(capsys, 7, ok, f"pure {g2_pure:.4g}, impurity {eps:.5f} (oracle {oracle:.4f}) -> {g2_dirty:.4f}, Poisson split {g2_laser:.4f}")


def test_criterion_08_fit_recovery(capsys):
    errors = {}

    p, y, s = forward.saturation_data(8)
    r = fit_saturation(p, y, s)
    for k, v in forward.SAT_TRUTH.items():
        errors[f"saturation.{k}"] = abs(r.params[k] / v - 1)

    x, y, s = forward.rabi_data(8)
    r = fit_rabi(x, y, s)
    for k, v in forward.RABI_TRUTH.items():
        errors[f"rabi.{k}"] = abs(r.params[k] / v - 1)

    f, y, s = forward.voigt_data(8)
    r = fit_voigt(f, y, s)
    for k, v in forward.VOIGT_TRUTH.items():
        if k == "gauss_fwhm":
            continue  # held at the instrument width
        if k == "background":
            # a flat offset near zero has no meaningful relative error; judge it against the line height
            errors[f"voigt.{k}"] = abs(r.params[k] - v) / float(y.max())
        else:
            scale = forward.VOIGT_TRUTH["lorentz_fwhm"] if k == "center" else v
            errors[f"voigt.{k}"] = abs(r.params[k] - v) / scale

    cfg = config(8, duration=0.2, jitter=20e-12)
    hist = forward.decay_data(cfg, n_bins=400, span=2e-9, start=-0.3e-9)
    r = fit_exp_decay(hist, irf_sigma=20e-12)
    t1_err = abs(r.params["t1"] / EMITTER.t1 - 1)

    jac_err = 0.0
    for model, xs, theta in JACOBIAN_CASES:
        free = slice(0, 2) if (model.names[2:3] == ("gauss_fwhm",) and theta[2] == 0.0) else slice(None)
        a = model.jac(xs, np.asarray(theta, float))[:, free]
        n = numeric_jacobian(model, xs, theta)[:, free]
        scale = np.max(np.abs(n), axis=0)
        scale[scale == 0] = 1.0
        jac_err = max(jac_err, float(np.max(np.abs(a - n) / scale)))

    worst = max(errors, key=errors.get)
    ok = max(errors.values()) <= 0.03 and t1_err <= 0.01 and jac_err <= 1e-4
    verdict(
        capsys, 8, ok,
        f"worst parameter {worst} {errors[worst]:.4f}, T1 {r.params['t1'] * 1e12:.3f} ps ({t1_err:.4f}), "
        f"max Jacobian rel. error {jac_err:.1e}",
    )


def test_criterion_09_sweep(capsys):
    areas = list(np.arange(0.2, math.pi, 0.2)) + [math.pi]
    pts = sweep_squeezing(config(9, duration=0.5), areas)
    ratios = np.array([p.sigma_ratio for p in pts])
    se = np.array([p.sigma_ratio_se for p in pts])
    rises = [i for i in range(len(pts) - 1) if ratios[i + 1] > ratios[i] + 2 * se[i + 1]]
    ok = not rises and int(np.argmin(ratios)) == len(pts) - 1
    verdict(capsys, 9, ok, f"ratio {ratios[0]:.4f} at 0.2 -> {ratios[-1]:.4f} at pi, minimum at {areas[int(np.argmin(ratios))]:.3f}" + (f"; rises at {rises}" if rises else ""))


def test_criterion_10_determinism_and_format(capsys, tmp_path):
    cfg = config(10, duration=0.2, jitter=20e-12, dead_time=5e-9, two_photon_prob=0.0128, hbt_ratio=0.5)
    files = []
    for i, workers in enumerate((1, 1, 4)):
        path = tmp_path / f"run{i}.ptag"
        write_tags(simulate_pulsed(cfg, workers=workers), path)
        files.append(path.read_bytes())
    identical = files[0] == files[1] == files[2]
    differs = encode(simulate_pulsed(replace(cfg, seed=11))) != files[0]

    g = np.random.default_rng(10)
    mismatches = 0
    for i in range(1000):
        n = int(g.integers(0, 500))
        times = np.sort(g.integers(0, 2**63, n, dtype=np.uint64) * np.uint64(2) + g.integers(0, 2, n, dtype=np.uint64))
        stream = TagStream(times, g.integers(0, 255, n).astype(np.uint8), int(g.integers(1, 10_000)) * 1e-12)
        path = tmp_path / "rt.ptag"
        write_tags(stream, path)
        mismatches += read_tags(path) != stream
    ok = identical and differs and mismatches == 0
    verdict(capsys, 10, ok, f"bit-identical across runs and worker counts: {identical}, seed-sensitive: {differs}, round-trip mismatches {mismatches}/1000")
