"""Command-line entry point: ``fragkin {simulate,mc,analyze,asympt,kernel}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import glob
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .asympt import AsymptoticLaws, lambda_powerlaw, m3_exact, number_asympt, surface_asympt
from .checks import loglog_slope, summarize
from .config import load_json, mc_config, simulation_config
from .errors import ConfigError, DomainError, FragkinError
from .grid import DensityState, make_log_grid
from .io import dumps, read_csv, write_csv, write_json_atomic
from .kernel import kernel_from_dict, kernel_to_dict, mellin_p, mu_coeff, splinter_mean_count
from .limitdist import distance_to_limit, fit_alpha, limit_density, rescale
from .mc import gillespie_run
from .pde import run

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

logger = logging.getLogger("fragkin")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _check(name: str, value, threshold, passed) -> dict:
    return {"name": name, "value": value, "threshold": threshold, "passed": bool(passed)}


def _write_manifest(out: Path, command: str, config, started: str, files: list, checks: list) -> None:
    missing = [f for f in files if not (out / f).is_file()]
    if missing:
        raise OSError(f"expected output files are missing: {missing}")
    write_json_atomic(
        out / "manifest.json",
        {
            "tool": "fragkin",
            "version": __version__,
            "command": command,
            "config": config,
            "started": started,
            "finished": _now(),
            "files": sorted(files),
            "checks": checks,
        },
    )


# --- simulate ---------------------------------------------------------------


def cmd_simulate(args) -> int:
    started = _now()
    doc = load_json(args.config)
    config = simulation_config(doc)
    out = Path(args.out)
    traj = run(config)

    files = []
    rows = zip(traj.t, traj.N, traj.lam, traj.S, traj.V, traj.V_lost)
    write_csv(out / "observables.csv", ["t", "N", "lambda", "S", "V", "V_lost"], rows)
    files.append("observables.csv")

    if traj.snapshots is not None:
        index = []
        for k, values in enumerate(traj.snapshots):
            name = f"snapshots/snap_{k:05d}.csv"
            write_csv(out / name, ["r", "n"], zip(traj.grid.r, values))
            files.append(name)
            index.append((k, traj.t[k], name))
        write_csv(out / "snapshots" / "index.csv", ["index", "t", "file"], index)
        files.append("snapshots/index.csv")

    summary = summarize(traj, config.kernel)
    write_json_atomic(out / "summary.json", {"config": doc, "summary": summary})
    files.append("summary.json")

    checks = [
        _check("volume_conservation", summary["conservation_residual"], 1e-4,
               summary["conservation_residual"] <= 1e-4),
    ]
    if "m3_slope_rel_error" in summary:
        checks.append(_check("m3_linear_slope", summary["m3_slope_rel_error"], 0.01,
                             summary["m3_slope_rel_error"] <= 0.01))
        for s, err in summary["moment_chain_rel_error"].items():
            checks.append(_check(f"moment_chain_s{s}", err, 0.02, err <= 0.02))
    _write_manifest(out, "simulate", doc, started, files, checks)
    print(f"wrote {len(files)} files to {out}")
    return EXIT_OK


# --- mc -----------------------------------------------------------------------


def cmd_mc(args) -> int:
    started = _now()
    doc = load_json(args.config)
    config = mc_config(doc, seed=args.seed, replicas=args.replicas)
    out = Path(args.out)
    result = gillespie_run(config)

    files = ["timeseries.csv"]
    write_csv(
        out / "timeseries.csv",
        ["t", "N_w", "S_w", "V_w", "frozen_volume"],
        zip(result.t, result.N, result.S, result.V, result.frozen),
    )
    edges = result.hist_edges
    for k, t in enumerate(result.t):
        name = f"histograms/hist_{k:05d}.csv"
        write_csv(out / name, ["bin_left", "bin_right", "weighted_count"],
                  zip(edges[:-1], edges[1:], result.hist[k]))
        files.append(name)
    write_csv(out / "histograms" / "index.csv", ["index", "t", "file"],
              [(k, t, f"histograms/hist_{k:05d}.csv") for k, t in enumerate(result.t)])
    files.append("histograms/index.csv")

    total = result.V + result.frozen
    v0 = total[0]
    se = result.standard_error("total_volume")
    checks = []
    if config.replicas > 1:
        with np.errstate(invalid="ignore", divide="ignore"):
            z = np.where(se > 0, np.abs(total - v0) / se, 0.0)
        checks.append(_check("volume_within_3_se", float(np.nanmax(z)), 3.0, np.nanmax(z) <= 3.0))
    if result.t[-1] > 0 and not result.truncated:
        slope = loglog_slope(result.t, result.N, result.t[-1] / 10.0)
        checks.append(_check("number_growth_exponent", slope, [2.8, 3.2], 2.8 <= slope <= 3.2))
    summary = {
        "replicas": config.replicas,
        "seed": config.seed,
        "events": [r.events for r in result.replicas],
        "truncated": result.truncated,
        "extinct_at": [r.extinct_at for r in result.replicas],
    }
    write_json_atomic(out / "summary.json", {"config": doc, "summary": summary})
    files.append("summary.json")
    _write_manifest(out, "mc", doc, started, files, checks)
    print(f"wrote {len(files)} files to {out}")
    return EXIT_OK


# --- analyze ------------------------------------------------------------------


def _snapshot_times(paths: list) -> dict:
    times = {}
    for index in {p.parent / "index.csv" for p in paths}:
        if not index.is_file():
            continue
        with open(index, encoding="ascii") as fh:
            next(fh)
            for line in fh:
                _, t, name = line.rstrip("\n").split(",", 2)
                times[(index.parent.parent / name).resolve()] = float(t)
    return times


def _load_snapshot(path: Path, t: float) -> DensityState:
    header, data = read_csv(path)
    if header[:2] != ["r", "n"] or data.shape[0] < 8:
        raise ConfigError(f"{path}: expected columns r,n with at least 8 rows")
    r, n = data[:, 0], data[:, 1]
    try:
        grid = make_log_grid(r[0], r[-1], len(r))
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not grid.matches(r):
        raise ConfigError(f"{path}: sizes are not a geometric grid")
    return DensityState(grid, n, t)


def cmd_analyze(args) -> int:
    started = _now()
    paths = sorted(Path(p) for p in glob.glob(args.snapshots))
    paths = [p for p in paths if p.name != "index.csv"]
    if not paths:
        raise ConfigError(f"no snapshot files match {args.snapshots!r}")
    if not args.alpha > 0:
        raise ConfigError(f"--alpha must be > 0, got {args.alpha}")
    times = _snapshot_times(paths)
    out = Path(args.out)
    report, files = [], []
    for path in paths:
        t = times.get(path.resolve(), float("nan"))
        state = _load_snapshot(path, t)
        g = rescale(state)
        dist = distance_to_limit(g, args.alpha)
        entry = {"file": str(path), "t": t, "lambda": g.lam, **dist}
        try:
            entry["alpha_hat"] = fit_alpha(g)
        except FragkinError:
            entry["alpha_hat"] = None
        report.append(entry)
        name = f"limit_{path.stem}.csv"
        write_csv(out / name, ["x", "g", "f_limit"], zip(g.x, g.g, limit_density(args.alpha, g.x)))
        files.append(name)
    write_json_atomic(out / "report.json", {"alpha": args.alpha, "snapshots": report})
    files.append("report.json")
    _write_manifest(out, "analyze", {"snapshots": args.snapshots, "alpha": args.alpha},
                    started, files, [])
    print(f"analyzed {len(paths)} snapshots into {out}")
    return EXIT_OK


# --- asympt / kernel -------------------------------------------------------------


def _times_from_args(args) -> np.ndarray:
    if args.t:
        return np.asarray(args.t, dtype=float)
    if args.t_range:
        lo, hi, n = args.t_range
        n = int(n)
        if args.log:
            if lo <= 0:
                raise ConfigError("--log needs a positive lower time")
            return np.geomspace(lo, hi, n)
        return np.linspace(lo, hi, n)
    raise ConfigError("give --t or --t-range")


def cmd_asympt(args) -> int:
    times = _times_from_args(args)
    if np.any(times <= 0):
        raise ConfigError("asymptotic laws need t > 0")
    laws = AsymptoticLaws.power_law(args.alpha, args.C, args.V, args.m3_0)
    rows = []
    for t in times:
        rows.append((
            t,
            surface_asympt(t, args.alpha, args.C, args.V),
            lambda_powerlaw(t, args.alpha, args.C),
            number_asympt(t, args.alpha, args.C, args.V),
            m3_exact(t, laws),
        ))
    _print_csv(["t", "S", "lambda", "N", "M3"], rows)
    return EXIT_OK


def _kernel_from_args(args):
    if args.config:
        doc = load_json(args.config)
        return kernel_from_dict(doc.get("kernel", doc))
    if args.spec:
        try:
            return kernel_from_dict(json.loads(args.spec))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--spec is not valid JSON ({exc})") from None
    if args.alpha is None or args.C is None:
        raise ConfigError("give --config, --spec or both --alpha and --C")
    return kernel_from_dict({"type": "power_law", "alpha": args.alpha, "C": args.C})


def cmd_kernel(args) -> int:
    kernel = _kernel_from_args(args)
    rows = [(f"p({s})", mellin_p(kernel, s)) for s in (1, 2, 3, 4)]
    rows.append(("mu", mu_coeff(kernel)))
    rows.append(("splinter_mean_count", splinter_mean_count(kernel)))
    print(f"# kernel {json.dumps(kernel_to_dict(kernel), sort_keys=True)}", file=sys.stderr)
    _print_csv(["quantity", "value"], rows)
    return EXIT_OK


def _print_csv(header, rows) -> None:
    import csv

    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else repr(float(v)) for v in row])


# --- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fragkin", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fragkin {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate the kinetic equation")
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("mc", help="run the stochastic branching-process oracle")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--replicas", type=int, help="override the replica count")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("analyze", help="compare density snapshots with the limit law")
    p.add_argument("--snapshots", required=True, help="glob matching snapshot CSV files")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("asympt", help="tabulate the closed-form laws for a power-law kernel")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--V", type=float, default=1.0)
    p.add_argument("--m3-0", type=float, default=0.0, help="initial surface M(3, 0)")
    p.add_argument("--t", type=float, nargs="+")
    p.add_argument("--t-range", type=float, nargs=3, metavar=("T0", "T1", "N"))
    p.add_argument("--log", action="store_true", help="log-spaced --t-range")
    p.set_defaults(func=cmd_asympt)

    p = sub.add_parser("kernel", help="print Mellin moments of a kernel")
    p.add_argument("--config", help="JSON file with a kernel spec (or a run config)")
    p.add_argument("--spec", help="inline JSON kernel spec")
    p.add_argument("--alpha", type=float)
    p.add_argument("--C", type=float)
    p.set_defaults(func=cmd_kernel)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"fragkin: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FloatingPointError as exc:
        print(f"fragkin: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"fragkin: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
