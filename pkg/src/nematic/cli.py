"""Command-line interface: ``nematic run | resume | sweep | analyze | verify``.

Exit codes: 0 on success, 1 on configuration/input errors (including
insufficient data for a fit or a failed verify suite), 2 when a run blows up
(NonFinite; partial output is still written).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from .diagnostics import (DegenerateWindow, InsufficientData, detect_steady, energy_limit,
                          estimate_lojasiewicz, fit_decay, lojasiewicz_fit)
from .integrator import run as integrate
from .io import (ConfigError, FormatError, GridMismatch, IoError, RunConfig, ValidationError,
                 config_text, generate_initial, load_config, read_series, read_snapshot,
                 save_config, series_rows, write_rows, write_snapshot)
from .spectral import norm_squared

log = logging.getLogger("nematic")

EXIT_OK, EXIT_ERROR, EXIT_NONFINITE = 0, 1, 2
SIDECAR = "run.cfg"
PREVIOUS_SUFFIX = ".prev"
ANALYZED_COLUMNS = ("E", "D", "A", "l2_v", "h1_v", "h2_d", "resid_d", "resid_d_dual")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would collide with NonFinite
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


# -- configuration helpers ---------------------------------------------------------

def bundled_configs() -> list[str]:
    return sorted(p.name for p in resources.files("nematic").joinpath("configs").iterdir()
                  if p.name.endswith(".cfg"))


def resolve_config(name: str) -> Path:
    """A path on disk, or the name of a bundled config (with or without .cfg)."""
    path = Path(name)
    if path.exists():
        return path
    stem = name if name.endswith(".cfg") else name + ".cfg"
    bundled = resources.files("nematic").joinpath("configs", stem)
    if bundled.is_file():
        return Path(str(bundled))
    raise IoError(f"config {name!r} not found (bundled: {', '.join(bundled_configs())})")


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace("initial", seed=args.seed)
    if getattr(args, "out_dir", None) is not None:
        cfg = cfg.replace("output", dir=args.out_dir)
    if getattr(args, "dt", None) is not None:
        cfg = cfg.replace("scheme", dt=args.dt)
    if getattr(args, "alpha", None) is not None:
        cfg = cfg.replace("params", alpha=args.alpha)
    return cfg


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


# -- running ----------------------------------------------------------------------

def execute(cfg: RunConfig, initial=None, history=None, series_prefix=None) -> dict:
    """Run one configuration and write its outputs; returns a summary dict.

    ``series_prefix`` holds already written CSV rows (header excluded) that
    precede ``initial``; used by resume so the series covers the whole run.
    """
    grid = cfg.grid.build()
    if initial is None:
        initial = generate_initial(cfg.initial, grid)
    out = Path(cfg.output.dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output directory {out}: {exc}") from exc
    save_config(cfg, out / SIDECAR)

    det = cfg.detect
    stop = None
    if det.stop_when_steady:
        stop = lambda r: r.A < det.tol_A and r.resid_d < det.tol_resid
    traj = integrate(initial, cfg.params, cfg.scheme, diag_every=cfg.output.diag_every,
                     snapshot_every=cfg.output.snapshot_every or None, stop_when=stop,
                     history=history)

    rows = series_rows(traj, grid.dim)
    if series_prefix is not None:
        # the resumed run's first record repeats the checkpoint row already on disk
        rows = [rows[0]] + series_prefix + rows[2:]
    write_rows(rows, out / cfg.output.series)

    final = traj.final
    checkpoint = out / cfg.output.checkpoint
    write_snapshot(final, checkpoint, cfg.params)
    previous = checkpoint.with_name(checkpoint.name + PREVIOUS_SUFFIX)
    if cfg.scheme.scheme == "imex_bdf2" and traj.previous is not None:
        write_snapshot(traj.previous, previous, cfg.params)
    elif previous.exists():
        previous.unlink()
    if cfg.output.snapshot_every:
        snapdir = out / "snapshots"
        snapdir.mkdir(exist_ok=True)
        for i, snap in enumerate(traj.snapshots):
            write_snapshot(snap, snapdir / f"snap_{i:05d}.nemf", cfg.params)

    steady = detect_steady(traj, det.tol_A, det.tol_resid)
    last = traj.records[-1]
    summary = {
        "t_final": last.t,
        "records": len(traj.records),
        "E": last.E,
        "A": last.A,
        "resid_d": last.resid_d,
        "time_to_steady": None if steady is None else steady.t,
        "error": traj.error,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    summary["trajectory"] = traj
    return summary


def _report_run(summary: dict, out_dir: str) -> int:
    print(f"t = {summary['t_final']:.6g}  E = {summary['E']:.6e}  A = {summary['A']:.3e}  "
          f"resid = {summary['resid_d']:.3e}  -> {out_dir}")
    if summary["time_to_steady"] is not None:
        print(f"steady state detected at t = {summary['time_to_steady']:.6g}")
    if summary["error"]:
        print(f"error: {summary['error']}", file=sys.stderr)
        return EXIT_NONFINITE
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = apply_overrides(load_config(resolve_config(args.config)), args)
    summary = execute(cfg)
    return _report_run(summary, cfg.output.dir)


def cmd_resume(args) -> int:
    ckpt = Path(args.checkpoint)
    cfg_path = Path(args.config) if args.config else ckpt.parent / SIDECAR
    if not cfg_path.exists():
        raise IoError(f"no configuration for {ckpt}: pass --config or keep {SIDECAR} beside it")
    cfg = load_config(cfg_path)
    if args.out_dir is None:
        args.out_dir = str(ckpt.parent)
    cfg = apply_overrides(cfg, args)
    cfg = cfg.replace("scheme", t_end=args.t_end)
    grid = cfg.grid.build()
    state = read_snapshot(ckpt, expected_grid=grid)
    if args.t_end < state.t:
        raise ValidationError("scheme.t_end", f"{args.t_end} is before the checkpoint time {state.t}")
    history = None
    previous = ckpt.with_name(ckpt.name + PREVIOUS_SUFFIX)
    if cfg.scheme.scheme == "imex_bdf2" and previous.exists():
        history = read_snapshot(previous, expected_grid=grid)
    prefix = None
    series = Path(cfg.output.dir) / cfg.output.series
    if series.exists():
        with open(series, newline="") as fh:
            old = list(csv.reader(fh))[1:]
        prefix = [r for r in old if r and float(r[0]) <= state.t * (1 + 1e-14)]
    summary = execute(cfg, initial=state, history=history, series_prefix=prefix)
    return _report_run(summary, cfg.output.dir)


# -- sweeps -----------------------------------------------------------------------

def _sweep_job(cfg: RunConfig) -> dict:
    logging.getLogger("nematic").setLevel(logging.ERROR)
    summary = execute(cfg)
    traj = summary.pop("trajectory")
    row = {"alpha": cfg.params.alpha, "nu": cfg.params.nu,
           "time_to_steady": summary["time_to_steady"], "theta": math.nan,
           "rate": math.nan, "error": summary["error"] or ""}
    try:
        row["theta"] = estimate_lojasiewicz(traj).theta
    except (InsufficientData, DegenerateWindow) as exc:
        log.info("no Lojasiewicz estimate for %s: %s", cfg.output.dir, exc)
    try:
        row["rate"] = fit_decay(traj.series("t"), traj.series("A")).rate
    except InsufficientData as exc:
        log.info("no decay fit for %s: %s", cfg.output.dir, exc)
    return row


def cmd_sweep(args) -> int:
    base = apply_overrides(load_config(resolve_config(args.config)), args)
    key, values = ("alpha", args.alphas) if args.alphas is not None else ("nu", args.nus)
    jobs = []
    for value in values:
        cfg = base.replace("params", **{key: value})
        cfg = cfg.replace("output", dir=str(Path(base.output.dir) / f"{key}_{value:g}"))
        jobs.append(cfg)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_job, jobs))
    else:
        rows = [_sweep_job(cfg) for cfg in jobs]

    out = Path(base.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    cols = ["alpha", "nu", "time_to_steady", "theta", "rate", "error"]
    table = [cols] + [[_cell(r[c]) for c in cols] for r in rows]
    write_rows(table, out / "sweep.csv")
    widths = [max(len(row[i]) for row in table) for i in range(len(cols))]
    for row in table:
        print("  ".join(cell.rjust(w) for cell, w in zip(row, widths)).rstrip())
    return EXIT_NONFINITE if any(r["error"] for r in rows) else EXIT_OK


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


# -- analysis ---------------------------------------------------------------------

def _fit_dict(fit) -> dict:
    return {"model": fit.model, "rate": fit.rate, "amplitude": fit.amplitude,
            "r_squared": fit.r_squared, "window": list(fit.window), "theta": fit.theta,
            "exponential": fit.exponential}


def analyze_series(path) -> dict:
    cols = read_series(path)
    if "t" not in cols:
        raise FormatError(f"{path}: no 't' column")
    t = cols["t"]
    if t.size == 0:
        raise InsufficientData(f"{path}: no data rows")
    report = {"series": str(path), "samples": int(t.size), "fits": {}}
    fitted = 0
    for name in ANALYZED_COLUMNS:
        if name not in cols:
            continue
        try:
            report["fits"][name] = _fit_dict(fit_decay(t, cols[name]))
            fitted += 1
        except InsufficientData as exc:
            report["fits"][name] = {"error": str(exc)}
    if fitted == 0:
        raise InsufficientData(f"{path}: no column could be fitted")
    if {"E", "D", "resid_d_dual"} <= cols.keys():
        try:
            e_inf = energy_limit(t, cols["E"], cols["D"])
            fit = lojasiewicz_fit(cols["E"], cols["resid_d_dual"], e_inf)
            report["lojasiewicz"] = dict(_fit_dict(fit), E_infinity=e_inf)
        except (InsufficientData, DegenerateWindow) as exc:
            report["lojasiewicz"] = {"error": str(exc)}
    return report


def analyze_snapshots(path_a, path_b, padding_factor=None) -> dict:
    a = read_snapshot(path_a, padding_factor=padding_factor)
    b = read_snapshot(path_b, expected_grid=a.grid)
    g = a.grid
    dv = norm_squared(g, a.v.coeffs - b.v.coeffs)
    dd = norm_squared(g, a.d.coeffs - b.d.coeffs, "H1")
    mean = lambda s: [float(x) for x in s.v.mean]
    return {"snapshots": [str(path_a), str(path_b)], "t": [a.t, b.t],
            "v_L2_squared": dv, "d_H1_squared": dd, "delta": dv + dd,
            "mean_v": [mean(a), mean(b)]}


def cmd_analyze(args) -> int:
    if args.snapshots:
        report = analyze_snapshots(*args.snapshots)
    elif args.series:
        report = analyze_series(args.series)
    else:
        raise UsageError("analyze needs a series CSV or --snapshots A B")
    text = json.dumps(report, indent=2, default=_json_default)
    if args.output:
        Path(args.output).write_text(text + "\n")
    print(text)
    return EXIT_OK


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"cannot serialize {type(value)}")


# -- verification -----------------------------------------------------------------

def cmd_verify(args) -> int:
    from .acceptance import SUITES

    names = list(SUITES) if args.suite == "all" else [args.suite]
    if any(n not in SUITES for n in names):
        raise UsageError(f"unknown suite {args.suite!r}; choose from all, {', '.join(SUITES)}")
    failed = 0
    for name in names:
        for check in SUITES[name]():
            print(check.line(), flush=True)
            failed += not check.passed
    print(f"{'FAILED' if failed else 'OK'}: {failed} failing check(s)")
    return EXIT_ERROR if failed else EXIT_OK


# -- entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nematic", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def overrides(p, alpha=True):
        p.add_argument("--seed", type=int, help="override initial.seed")
        p.add_argument("--out-dir", help="override output.dir")
        p.add_argument("--dt", type=float, help="override scheme.dt")
        if alpha:
            p.add_argument("--alpha", type=float, help="override params.alpha")

    p = sub.add_parser("run", help="integrate one configuration")
    p.add_argument("config", help=f"config file or bundled name ({', '.join(bundled_configs())})")
    overrides(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("resume", help="continue from a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--t-end", type=float, required=True, help="new final time")
    p.add_argument("--config", help=f"config (default: {SIDECAR} beside the checkpoint)")
    overrides(p)
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("sweep", help="one run per alpha or nu value")
    p.add_argument("config")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--alphas", type=_float_list, help="e.g. 0,0.5,1")
    group.add_argument("--nus", type=_float_list, help="e.g. 0.5,1,2")
    p.add_argument("--jobs", type=int, default=1, help="parallel processes")
    overrides(p, alpha=False)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="fit decay rates and the Lojasiewicz exponent")
    p.add_argument("series", nargs="?", help="series CSV written by run")
    p.add_argument("--snapshots", nargs=2, metavar=("A", "B"), help="compare two snapshots")
    p.add_argument("--output", help="also write the JSON report here")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("verify", help="run an acceptance suite")
    p.add_argument("suite", help="suite name or 'all'")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"nematic: invalid configuration: {exc}", file=sys.stderr)
    except (ConfigError, IoError, FormatError, GridMismatch, InsufficientData,
            DegenerateWindow, UsageError, ValueError) as exc:
        print(f"nematic: {type(exc).__name__}: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
