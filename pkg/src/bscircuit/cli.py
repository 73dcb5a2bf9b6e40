"""Command-line entry point.

Subcommands: ``run``, ``sweep``, ``profile``, ``collapse``, ``snapshot``,
``verify``.  Output goes to ``--out``, else ``$BSCIRCUIT_OUT``, else the
config's ``output.directory``.  Exit codes: 0 ok, 1 usage or config error,
2 runtime failure (including a failed ``verify``).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .analysis import CollapsePoint, scaling_collapse
from .ensemble import default_threads, final_state, run_ensemble, sweep
from .formats import (
    Config,
    ConfigError,
    CsvFormatError,
    SweepWriter,
    header_lines,
    load_config,
    read_sweep,
    snapshot_image,
    write_collapse,
    write_profile,
)
from .observables import classify_sites
from .verify import run_verify

OUT_ENV = "BSCIRCUIT_OUT"
log = logging.getLogger("bscircuit")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bscircuit", description="Measurement-only Bacon-Shor circuit simulator")
    p.add_argument("--version", action="version", version=f"bscircuit {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, type=Path)
            sp.add_argument("--seed", type=_u64, help="overrides the config seed")
            sp.add_argument("--threads", type=_positive, default=None)
        sp.add_argument("--out", type=Path, default=None)

    for name, text in (
        ("run", "ensemble at the configured point, one sweep-CSV row"),
        ("sweep", "one ensemble per grid point of the sweep section"),
        ("profile", "ensemble-averaged correlation profiles"),
        ("snapshot", "site classification raster of one trajectory"),
    ):
        common(sub.add_parser(name, help=text))

    c = sub.add_parser("collapse", help="finite-size scaling collapse of sweep CSVs")
    c.add_argument("inputs", nargs="+", type=Path)
    c.add_argument("--observable", default="Xr", choices=("Xr", "Xc", "Zr", "Zc"))
    c.add_argument("--p2", type=float, default=0.0, help="use rows at this p2")
    c.add_argument("--pc", type=float, default=0.5)
    c.add_argument("--window", type=float, default=0.15)
    c.add_argument("--gamma-range", type=float, nargs=2, default=(0.5, 3.0))
    c.add_argument("--nu-range", type=float, nargs=2, default=(0.3, 2.0))
    common(c, config=False)

    v = sub.add_parser("verify", help="dense-oracle and symmetry self-check")
    v.add_argument("--seeds", type=_positive, default=20)
    v.add_argument("--steps", type=_positive, default=1000)
    v.add_argument("--seed", type=_u64, default=2024)
    return p


def _out_dir(args, cfg: Config | None) -> Path:
    if args.out is not None:
        return args.out
    env = os.environ.get(OUT_ENV)
    if env:
        return Path(env)
    return Path(cfg.directory) if cfg is not None else Path(".")


def _load(args) -> Config:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _threads(args) -> int:
    return args.threads or default_threads()


def cmd_run(args) -> int:
    cfg = _load(args)
    path = _out_dir(args, cfg) / "run.csv"
    stats = run_ensemble(cfg.run_config(), _threads(args))
    with SweepWriter(path, cfg, cfg.seed) as w:
        w.append(stats)
    log.info("wrote %s (%.1f s)", path, stats.wall_time)
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if cfg.p1_list is None and cfg.p2_list is None and cfg.L_list is None:
        raise ConfigError("sweep: section missing (need p1_list, p2_list or L_list)")
    path = _out_dir(args, cfg) / "sweep.csv"
    grid = cfg.grid()
    with SweepWriter(path, cfg, cfg.seed) as w:

        def sink(stats):
            w.append(stats)
            c = stats.config
            log.info("L=%d p1=%g p2=%g done in %.1f s", c.spec.L, c.mix.p1, c.mix.p2, stats.wall_time)

        sweep(grid, cfg.run_config(profiles=False), _threads(args), sink)
    log.info("wrote %s (%d rows)", path, len(grid))
    return 0


def cmd_profile(args) -> int:
    cfg = _load(args)
    path = _out_dir(args, cfg) / "profile.csv"
    stats = run_ensemble(cfg.run_config(profiles=True), _threads(args))
    write_profile(path, stats, cfg)
    log.info("wrote %s", path)
    return 0


def cmd_snapshot(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    rc = cfg.run_config(profiles=False)
    grid = classify_sites(final_state(rc, 0), rc.spec)
    comments = header_lines("snapshot", cfg, cfg.seed)
    comments = [c[2:] for c in comments]
    svg = out / "snapshot.svg" if "svg" in cfg.formats else None
    snapshot_image(grid, out / "snapshot.pgm", svg, comments)
    side = header_lines("snapshot densities", cfg, cfg.seed) + [
        f"x_density {grid.x_site_density:.10g}",
        f"z_density {grid.z_site_density:.10g}",
    ]
    (out / "snapshot.txt").write_text("\n".join(side) + "\n")
    log.info("x-site density %.4f, z-site density %.4f", grid.x_site_density, grid.z_site_density)
    return 0


def cmd_collapse(args) -> int:
    points = []
    for path in args.inputs:
        for row in read_sweep(path):
            if abs(row["p2"] - args.p2) > 1e-12:
                continue
            points.append(CollapsePoint(row["L"], row["p1"], row[args.observable], row[args.observable + "_err"]))
    sizes = sorted({pt.L for pt in points})
    if len(sizes) < 2:
        raise UsageError(f"collapse needs at least two system sizes at p2={args.p2}, found {sizes}")
    try:
        result = scaling_collapse(
            points,
            gamma_range=tuple(args.gamma_range),
            nu_range=tuple(args.nu_range),
            p_c=args.pc,
            window=args.window,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    used = [pt for pt in points if abs(pt.p - args.pc) <= args.window + 1e-12]
    extra = {
        "observable": args.observable,
        "p2": args.p2,
        "gamma_range": list(args.gamma_range),
        "nu_range": list(args.nu_range),
    }
    report, cloud = write_collapse(_out_dir(args, None), result, used, args.inputs, extra)
    print(
        f"gamma_bar = {result.gamma_bar:.4f} +- {result.gamma_bar_err:.4f}\n"
        f"nu = {result.nu:.4f} +- {result.nu_err:.4f}\n"
        f"quality = {result.quality:.4g}"
    )
    log.info("wrote %s and %s", report, cloud)
    return 0


def cmd_verify(args) -> int:
    rep = run_verify(n_seeds=args.seeds, n_steps=args.steps, master_seed=args.seed)
    if rep.passed:
        print(f"verify: PASS ({rep.steps} steps, {rep.elapsed:.1f} s)")
        return 0
    print(f"verify: FAIL after {rep.steps} steps ({rep.elapsed:.1f} s)")
    print(rep.failure.describe())
    return 2


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "profile": cmd_profile,
    "snapshot": cmd_snapshot,
    "collapse": cmd_collapse,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, UsageError) as exc:
        print(f"bscircuit: error: {exc}", file=sys.stderr)
        return 1
    except CsvFormatError as exc:
        print(f"bscircuit: error: malformed CSV: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"bscircuit: error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        print("bscircuit: interrupted; partial output kept", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
