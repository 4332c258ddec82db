"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 fit did not converge.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import analyze, fitting
from .config import (
    ConfigError,
    chain_from_dict,
    dumps,
    internal_efficiency_from_dict,
    load_json,
    simconfig_from_dict,
    simconfig_to_dict,
)
from .losschain import budget_table, total_efficiency
from .simulate import simulate
from .tagio import TagFileError, read_tags, write_tags

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_FIT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _emit(payload, path: str | None) -> None:
    text = dumps(payload)
    if path and path != "-":
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _write_csv(path: str, rows: list[dict]) -> None:
    if not rows:
        Path(path).write_text("")
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def _read_xy(path: str) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in rec])
            except ValueError:
                if rows:
                    raise DataError(f"{path}: non-numeric row {rec!r}") from None
                continue  # header
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = {len(r) for r in rows}
    if len(width) != 1 or width.pop() not in (2, 3):
        raise DataError(f"{path}: expected 2 or 3 columns (x, y[, sigma_y]) in every row")
    a = np.array(rows)
    return a[:, 0], a[:, 1], (a[:, 2] if a.shape[1] == 3 else None)


def _parse_range(text: str) -> np.ndarray:
    try:
        parts = [float(p) for p in text.split(":")]
    except ValueError:
        raise UsageError(f"--areas: expected start:stop:step, got {text!r}") from None
    if len(parts) == 1:
        return np.array(parts)
    if len(parts) != 3 or parts[2] <= 0:
        raise UsageError(f"--areas: expected start:stop:step with step > 0, got {text!r}")
    start, stop, step = parts
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(max(n, 0))


def _load_config(args):
    data = load_json(args.config)
    if getattr(args, "mode", None):
        data["mode"] = args.mode
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    if getattr(args, "duration", None) is not None:
        data["duration"] = args.duration
    return simconfig_from_dict(data)


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    stream = simulate(cfg, workers=args.workers)
    write_tags(stream, args.out)
    summary = {
        "config": simconfig_to_dict(cfg),
        "n_tags": len(stream),
        "channels": stream.channel_ids(),
        "mean_rate": len(stream) / cfg.duration,
        "out": str(args.out),
    }
    _emit(summary, args.json)
    return EXIT_OK


def _pulses_per_bin(bin_width: float, rep_mhz: float | None) -> int | None:
    if not rep_mhz:
        return None
    n = bin_width * rep_mhz * 1e6
    if abs(n - round(n)) > 1e-6:
        raise UsageError(f"bin width holds {n:.6g} pulses; choose a bin that is a whole number of periods")
    return round(n)


def cmd_squeeze(args) -> int:
    stream = read_tags(args.tags)
    if args.channel is not None:
        stream = stream.select(args.channel)
    width = args.bin_us * 1e-6
    n = _pulses_per_bin(width, args.rep_mhz)
    binned = analyze.bin_counts(stream, width, duration=args.duration_s, n_pulses_per_bin=n)
    report = analyze.squeezing_stats(binned)
    _emit(report.to_dict(), args.json)
    if args.csv:
        _write_csv(args.csv, analyze.histogram_rows(binned))
    if args.series_csv:
        _write_csv(
            args.series_csv,
            [{"bin": i, "t_start": i * width, "counts": int(c)} for i, c in enumerate(binned.counts)],
        )
    return EXIT_OK


def _period(args) -> float:
    if args.rep_mhz is not None:
        if not args.rep_mhz > 0:
            raise UsageError(f"--rep-mhz: must be > 0, got {args.rep_mhz!r}")
        return 1.0 / (args.rep_mhz * 1e6)
    if not args.period_ns > 0:
        raise UsageError(f"--period-ns: must be > 0, got {args.period_ns!r}")
    return args.period_ns * 1e-9


def _add_period(parser) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--period-ns", type=float, help="pulse period")
    group.add_argument("--rep-mhz", type=float, help="repetition rate (exact period 1/rate)")


def _hbt_pair(stream, channels):
    ids = stream.channel_ids()
    if channels is None:
        if len(ids) != 2:
            raise DataError(f"g2 needs two channels, file has {ids}; pass --channels A B")
        channels = ids
    return stream.select(channels[0]), stream.select(channels[1])


def cmd_g2(args) -> int:
    period = _period(args)
    stream = read_tags(args.tags)
    a, b = _hbt_pair(stream, args.channels)
    window = args.window_ns * 1e-9
    max_peak = analyze.G2_SKIP + analyze.G2_SIDE_PEAKS
    peaks = analyze.g2_peaks(a, b, period, window, max_peak)
    g2 = analyze.g2_zero_pulsed(a, b, period, window)
    ks = np.arange(-max_peak, max_peak + 1)
    baseline = float(peaks[np.abs(ks) > analyze.G2_SKIP].mean())
    _emit(
        {
            "g2_zero": g2,
            "center_coincidences": int(peaks[max_peak]),
            "side_peak_mean": baseline,
            "n_side_peaks": 2 * analyze.G2_SIDE_PEAKS,
            "period": period,
            "window": window,
            "counts": [len(a), len(b)],
        },
        args.json,
    )
    if args.csv:
        _write_csv(
            args.csv,
            [
                {"peak": int(k), "delay": float(k * period), "coincidences": int(c), "normalized": float(c / baseline)}
                for k, c in zip(ks, peaks)
            ],
        )
    return EXIT_OK


def cmd_decay(args) -> int:
    period = _period(args)
    stream = read_tags(args.tags)
    span = None if args.span_ps is None else args.span_ps * 1e-12
    hist = analyze.decay_histogram(stream, period, args.bins, start=args.start_ps * 1e-12, span=span)
    payload: dict = {"period": period, "n_tags": int(hist.counts.sum())}
    code = EXIT_OK
    if args.fit:
        res = fitting.fit_exp_decay(hist, irf_sigma=args.irf_ps * 1e-12)
        payload["fit"] = res.to_dict()
        code = EXIT_OK if res.converged else EXIT_FIT
    _emit(payload, args.json)
    if args.csv:
        _write_csv(
            args.csv,
            [
                {"t_start": float(lo), "t_stop": float(hi), "counts": int(c)}
                for lo, hi, c in zip(hist.edges[:-1], hist.edges[1:], hist.counts)
            ],
        )
    return code


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    areas = _parse_range(args.areas)
    points = analyze.sweep_squeezing(cfg, areas, bin_width=args.bin_us * 1e-6, workers=args.workers)
    rows = [
        {"area": p.area, "sigma_ratio": p.sigma_ratio, "sigma_ratio_se": p.sigma_ratio_se, "mean": p.mean}
        for p in points
    ]
    _emit({"points": rows}, args.json)
    if args.csv:
        _write_csv(args.csv, rows)
    return EXIT_OK


def cmd_fit(args) -> int:
    x, y, s = _read_xy(args.data)
    if args.curve == "saturation":
        res = fitting.fit_saturation(x, y, s)
    elif args.curve == "decay":
        res = fitting.fit_exp_decay((x, y), irf_sigma=args.irf_ps * 1e-12)
    elif args.curve == "rabi":
        res = fitting.fit_rabi(x, y, s, abscissa=args.abscissa)
    else:
        res = fitting.fit_voigt(x, y, s, gauss_fwhm=args.gauss_mhz * 1e6, fix_gauss=not args.free_gauss)
    _emit(res.to_dict(), args.json)
    return EXIT_OK if res.converged else EXIT_FIT


def cmd_budget(args) -> int:
    data = load_json(args.chain)
    chain = chain_from_dict(data)
    rho = args.rho if args.rho is not None else internal_efficiency_from_dict(data)
    if rho is None:
        raise UsageError("budget: internal efficiency unknown; give --rho or put rho / qe_espe+pee in the chain file")
    if not 0 <= rho <= 1:
        raise DataError(f"rho: must be in [0, 1], got {rho!r}")
    rows = budget_table(chain, rho)
    effs = [1.0] + chain.efficiencies
    out = sys.stdout
    out.write(f"internal efficiency rho = {rho:.4f}\n")
    out.write(f"{'plane':<28}{'stage':>8}{'T_ext':>9}{'rhoT':>9}{'ratio':>9}{'dB':>8}\n")
    for row, eff in zip(rows, effs):
        out.write(
            f"{row['plane']:<28}{eff:>8.4f}{row['t_ext']:>9.4f}{row['rho_t']:>9.4f}"
            f"{row['sigma_ratio']:>9.4f}{row['db']:>8.3f}\n"
        )
    out.write(f"{'total':<28}{'':>8}{total_efficiency(chain):>9.4f}\n")
    if args.json:
        _emit({"rho": rho, "total_efficiency": total_efficiency(chain), "planes": rows}, args.json)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rfsqueeze", description="Single-photon source time-tag simulation and statistics")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    sim = sub.add_parser("simulate", help="generate a PTAG1 time-tag file")
    sim.add_argument("mode", choices=["pulsed", "cw", "laser"])
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--duration", type=float, help="override duration (s)")
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--json", help="write run summary here instead of stdout")
    sim.set_defaults(func=cmd_simulate)

    an = sub.add_parser("analyze", help="statistics of a tag file")
    asub = an.add_subparsers(dest="analysis", parser_class=_Parser)

    sq = asub.add_parser("squeeze", help="binned counts, squeezing report, count histogram")
    sq.add_argument("--tags", required=True)
    sq.add_argument("--bin-us", type=float, default=1.0)
    sq.add_argument("--rep-mhz", type=float)
    sq.add_argument("--duration-s", type=float)
    sq.add_argument("--channel", type=int)
    sq.add_argument("--json")
    sq.add_argument("--csv", help="count histogram (one row per count value)")
    sq.add_argument("--series-csv", help="counts per bin (one row per bin)")
    sq.set_defaults(func=cmd_squeeze)

    g2 = asub.add_parser("g2", help="pulsed g2(0) from two channels")
    g2.add_argument("--tags", required=True)
    _add_period(g2)
    g2.add_argument("--window-ns", type=float, default=2.0)
    g2.add_argument("--channels", type=int, nargs=2)
    g2.add_argument("--json")
    g2.add_argument("--csv", help="peak areas (one row per peak)")
    g2.set_defaults(func=cmd_g2)

    dc = asub.add_parser("decay", help="time-resolved histogram folded on the pulse period")
    dc.add_argument("--tags", required=True)
    _add_period(dc)
    dc.add_argument("--bins", type=int, default=1000)
    dc.add_argument("--start-ps", type=float, default=0.0)
    dc.add_argument("--span-ps", type=float)
    dc.add_argument("--fit", action="store_true", help="fit lifetime with a Gaussian IRF")
    dc.add_argument("--irf-ps", type=float, default=0.0)
    dc.add_argument("--json")
    dc.add_argument("--csv")
    dc.set_defaults(func=cmd_decay)

    sw = sub.add_parser("sweep", help="parameter sweeps")
    swsub = sw.add_subparsers(dest="sweep", parser_class=_Parser)
    amp = swsub.add_parser("amplitude", help="squeezing versus pulse area")
    amp.add_argument("--config", required=True)
    amp.add_argument("--areas", required=True, help="start:stop:step in radians (stop inclusive)")
    amp.add_argument("--bin-us", type=float, default=1.0)
    amp.add_argument("--seed", type=int)
    amp.add_argument("--duration", type=float)
    amp.add_argument("--workers", type=int, default=1)
    amp.add_argument("--json")
    amp.add_argument("--csv")
    amp.set_defaults(func=cmd_sweep, mode="pulsed")

    ft = sub.add_parser("fit", help="fit a characterisation curve from CSV (x, y[, sigma_y])")
    ft.add_argument("curve", choices=["saturation", "decay", "rabi", "voigt"])
    ft.add_argument("--data", required=True)
    ft.add_argument("--json")
    ft.add_argument("--irf-ps", type=float, default=0.0, help="decay: Gaussian IRF sigma")
    ft.add_argument("--abscissa", choices=["amplitude", "power"], default="amplitude", help="rabi: x axis")
    ft.add_argument("--gauss-mhz", type=float, default=220.0, help="voigt: instrument FWHM")
    ft.add_argument("--free-gauss", action="store_true", help="voigt: fit the Gaussian width too")
    ft.set_defaults(func=cmd_fit)

    bd = sub.add_parser("budget", help="loss-budget table with predicted squeezing per plane")
    bd.add_argument("--chain", required=True)
    bd.add_argument("--rho", type=float, help="internal efficiency (overrides the chain file)")
    bd.add_argument("--json")
    bd.set_defaults(func=cmd_budget)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not hasattr(args, "func"):
            raise UsageError(parser.format_help())
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except fitting.DegenerateFitError as exc:
        sys.stderr.write(f"fit error: {exc}\n")
        return EXIT_FIT
    except (DataError, ConfigError, TagFileError, OSError, json.JSONDecodeError, ValueError) as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
