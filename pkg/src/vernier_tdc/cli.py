"""``vernier-tdc`` command line.

Exit codes: 0 ok, 1 configuration or I/O error, 2 flagged conversion.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .characterization import characterize, single_shot
from .config import ConfigError, load_config, schema_help
from .core import format_ps, time_from_ps
from .tdc import CSV_HEADER
from .tofpet import EVENT_CSV_HEADER, displacement, run_experiment

EXIT_OK, EXIT_ERROR, EXIT_FLAGGED = 0, 1, 2


def atomic_write(path: Path, data: str):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def to_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def _mm(x: float) -> str:
    return "" if math.isnan(x) else f"{x:.6f}"


def _out_dir(args) -> Path | None:
    if args.out is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args):
    overrides = {} if args.seed is None else {"seed": args.seed}
    return load_config(args.config, overrides)


def cmd_info(args) -> int:
    cfg = _config(args)
    tdc = cfg.build_tdc()
    m = tdc.metrics()
    info = {
        "architecture": cfg.architecture,
        "n_stages": cfg.n_stages,
        "lsb_fs": m.lsb,
        "full_scale_range_fs": m.full_scale_range,
        "n_codes": m.n_codes,
    }
    print(" ".join(f"{k}={v}" for k, v in info.items()))
    out = _out_dir(args)
    if out is not None:
        atomic_write(out / "info.json", to_json(info))
    return EXIT_OK


def cmd_convert(args) -> int:
    cfg = _config(args)
    try:
        t_start, t_stop = time_from_ps(args.t_start), time_from_ps(args.t_stop)
    except ValueError as exc:
        raise ConfigError(None, str(exc)) from None
    tdc = cfg.build_tdc().fit()
    result = tdc.convert(t_start, t_stop)
    text = to_csv(CSV_HEADER, [result.to_row()])
    sys.stdout.write(text)
    out = _out_dir(args)
    if out is not None:
        atomic_write(out / "conversion.csv", text)
    return EXIT_FLAGGED if (result.underrange or result.overrange) else EXIT_OK


def cmd_characterize(args) -> int:
    cfg = _config(args)
    out = _out_dir(args) or Path(".")
    # sweeps run on the jitter-free twin; same seed, so same mismatch
    tdc = cfg.build_tdc(jitter=False).fit()
    curve, report = characterize(tdc, coarse_step=cfg.sweep_step_ps)
    atomic_write(out / "transfer_curve.csv", to_csv(("dt_fs", "code"), curve.rows()))
    atomic_write(out / "nonlinearity.json", to_json(report.to_dict()))

    if cfg.jitter_sigma_ps:
        noisy = cfg.build_tdc().fit()
        dt = cfg.precision_dt_ps
        if dt is None:
            dt = noisy.metrics().full_scale_range // 2
        prec = single_shot(noisy, dt, cfg.precision_trials, cfg.seed)
        atomic_write(out / "precision.json", to_json(prec.to_dict()))
        print(f"precision dt_ps={format_ps(dt)} code_mean={prec.code_mean:.3f} code_std={prec.code_std:.3f}")

    if args.svg:
        from .plotting import staircase_svg

        atomic_write(out / "transfer_curve.svg", staircase_svg(curve))
    print(f"lsb_fs={report.lsb} dnl_peak={report.dnl_peak:.3f} inl_peak={report.inl_peak:.3f}")
    return EXIT_OK


def cmd_tof(args) -> int:
    cfg = _config(args)
    geom = cfg.geometry()
    if args.probe_dt is not None:
        try:
            dt = time_from_ps(args.probe_dt)
        except ValueError as exc:
            raise ConfigError(None, str(exc)) from None
        print(f"dt_fs={dt} displacement_mm={displacement(dt, geom):.3f}")
        return EXIT_OK

    out = _out_dir(args) or Path(".")
    res = run_experiment(
        geom,
        cfg.build_tdc(),
        cfg.n_events,
        positions=cfg.positions,
        seed=cfg.seed,
        arrival_noise_sigma=cfg.arrival_noise_ps,
        n_bins=cfg.histogram_bins,
    )
    rows = (
        (i, _mm(x), t1, t2, code, _mm(xe), _mm(e))
        for i, x, t1, t2, code, xe, e in res.rows()
    )
    atomic_write(out / "events.csv", to_csv(EVENT_CSV_HEADER, rows))
    counts, edges = res.histogram
    summary = dict(res.summary)
    summary["histogram"] = {"edges_mm": edges.tolist(), "counts": counts.tolist()}
    atomic_write(out / "summary.json", to_json(summary))
    if args.svg:
        from .plotting import histogram_svg

        atomic_write(out / "error_histogram.svg", histogram_svg(counts, edges))
    s = res.summary
    print(
        f"n_events={s['n_events']} n_overrange={s['n_overrange']} "
        f"max_abs_err_mm={s['max_abs_err_mm']:.3f} mean_abs_err_mm={s['mean_abs_err_mm']:.3f} "
        f"fwhm_mm={s['fwhm_mm']:.3f}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vernier-tdc",
        description="Behavioral Vernier delay-line TDC simulator.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(
            name,
            help=help_text,
            description=help_text,
            epilog=schema_help(),
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        p.add_argument("--config", metavar="PATH", help="key = value config file")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--seed", metavar="U64", help="override the config seed")
        p.set_defaults(func=func)
        return p

    add("info", cmd_info, "print resolution, range and code count")
    p = add("convert", cmd_convert, "convert one start/stop pair (times in ps)")
    p.add_argument("t_start", metavar="T_START_PS")
    p.add_argument("t_stop", metavar="T_STOP_PS")
    p = add("characterize", cmd_characterize, "transfer curve, DNL/INL and precision")
    p.add_argument("--svg", action="store_true", help="also write an SVG staircase")
    p = add("tof", cmd_tof, "TOF-PET localization experiment")
    p.add_argument("--svg", action="store_true", help="also write an SVG error histogram")
    p.add_argument(
        "--probe-dt", metavar="PS", help="only print the displacement for one interval"
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
