"""Config file, CSV schemas, collapse report and snapshot rasters.

Config (TOML)::

    seed = 1                      # master seed, default 0

    [lattice]
    L = 24                        # even, >= 6
    boundary = "periodic"         # or "open"

    [mix]
    p1 = 0.5                      # default 0.5
    p2 = 0.0                      # default 0.0

    [schedule]
    total_steps_factor = 100      # run length in units of L^2 steps
    burn_in_factor = 50
    sample_stride_factor = 1
    n_runs = 32

    [output]
    directory = "out"             # default "."
    formats = ["csv", "pgm"]      # "svg" adds a vector snapshot

    [sweep]
    p1_list = [0.4, 0.5]          # default: [mix.p1]
    p2_list = [0.0]               # default: [mix.p2]
    L_list = [12, 24]             # default: [lattice.L]

Every output file starts with ``#`` comment lines carrying the code version,
the seed and the config text; the data below them depends only on inputs.

Snapshot rasters are binary PGM (P5), one pixel per site, row ``i`` of the
lattice on image row ``i``: X-site 255, Z-site 0, gray 128, both 64.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from . import __version__
from .ensemble import EnsembleStats, RunConfig
from .lattice import OPEN, PERIODIC, LatticeSpec, MixChances
from .observables import BOTH, GRAY, X_SITE, Z_SITE, SnapshotGrid

SWEEP_COLUMNS = (
    "L", "p1", "p2", "Xr", "Xr_err", "Xc", "Xc_err", "Zr", "Zr_err", "Zc", "Zc_err",
    "S_bits", "S_err", "x_density", "z_density", "samples", "seed",
)
PROFILE_COLUMNS = ("delta", "X_row", "X_row_err", "Z_col", "Z_col_err", "Y_row", "Y_row_err")
POINT_COLUMNS = ("L", "p1", "x", "y", "y_err")

PIXEL = {X_SITE: 255, Z_SITE: 0, GRAY: 128, BOTH: 64}
MIN_L = 6


class ConfigError(ValueError):
    pass


class CsvFormatError(ValueError):
    pass


_SCHEMA = {
    "lattice": {"L": int, "boundary": str},
    "mix": {"p1": float, "p2": float},
    "schedule": {
        "total_steps_factor": float,
        "burn_in_factor": float,
        "sample_stride_factor": float,
        "n_runs": int,
    },
    "output": {"directory": str, "formats": list},
    "sweep": {"p1_list": list, "p2_list": list, "L_list": list},
}


@dataclass
class Config:
    L: int = 12
    boundary: str = PERIODIC
    p1: float = 0.5
    p2: float = 0.0
    total_steps_factor: float = 100
    burn_in_factor: float = 50
    sample_stride_factor: float = 1
    n_runs: int = 32
    seed: int = 0
    directory: str = "."
    formats: list = field(default_factory=lambda: ["csv", "pgm"])
    p1_list: list | None = None
    p2_list: list | None = None
    L_list: list | None = None
    text: str = ""

    def run_config(self, L: int | None = None, p1: float | None = None, p2: float | None = None, profiles=True) -> RunConfig:
        return RunConfig(
            spec=LatticeSpec(self.L if L is None else int(L), self.boundary),
            mix=MixChances(self.p1 if p1 is None else float(p1), self.p2 if p2 is None else float(p2)),
            total_steps_factor=self.total_steps_factor,
            burn_in_factor=self.burn_in_factor,
            sample_stride_factor=self.sample_stride_factor,
            n_runs=self.n_runs,
            master_seed=self.seed,
            profiles=profiles,
        )

    def grid(self) -> list[tuple[float, float, int]]:
        p1s = self.p1_list if self.p1_list is not None else [self.p1]
        p2s = self.p2_list if self.p2_list is not None else [self.p2]
        Ls = self.L_list if self.L_list is not None else [self.L]
        return [(float(a), float(b), int(L)) for L in Ls for b in p2s for a in p1s]


def _check_L(L, key):
    if not isinstance(L, int) or isinstance(L, bool):
        raise ConfigError(f"{key}: expected an integer")
    if L % 2:
        raise ConfigError(f"{key}: L must be even (got {L})")
    if L < MIN_L:
        raise ConfigError(f"{key}: L must be at least {MIN_L} (got {L})")


def _check_prob(v, key):
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not 0.0 <= v <= 1.0:
        raise ConfigError(f"{key}: must be a probability in [0, 1] (got {v!r})")


def parse_config(text: str) -> Config:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    cfg = Config(text=text)
    for key, value in raw.items():
        if key == "seed":
            if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value < 2**64:
                raise ConfigError("seed: expected an unsigned 64-bit integer")
            cfg.seed = value
            continue
        if key not in _SCHEMA:
            raise ConfigError(f"unknown key: {key}")
        if not isinstance(value, dict):
            raise ConfigError(f"{key}: expected a section")
        for sub, v in value.items():
            name = f"{key}.{sub}"
            if sub not in _SCHEMA[key]:
                raise ConfigError(f"unknown key: {name}")
            typ = _SCHEMA[key][sub]
            if typ is float and isinstance(v, int) and not isinstance(v, bool):
                v = float(v)
            if not isinstance(v, typ) or isinstance(v, bool):
                raise ConfigError(f"{name}: expected {typ.__name__}")
            setattr(cfg, sub, v)
    _check_L(cfg.L, "lattice.L")
    if cfg.boundary not in (PERIODIC, OPEN):
        raise ConfigError("lattice.boundary: must be 'periodic' or 'open'")
    _check_prob(cfg.p1, "mix.p1")
    _check_prob(cfg.p2, "mix.p2")
    if cfg.n_runs < 1:
        raise ConfigError("schedule.n_runs: must be at least 1")
    for name in ("total_steps_factor", "burn_in_factor", "sample_stride_factor"):
        if getattr(cfg, name) < 0:
            raise ConfigError(f"schedule.{name}: must be non-negative")
    if cfg.burn_in_factor >= cfg.total_steps_factor:
        raise ConfigError("schedule.burn_in_factor: must be smaller than total_steps_factor")
    if cfg.sample_stride_factor * MIN_L**2 < 1:
        raise ConfigError("schedule.sample_stride_factor: stride must be at least one step")
    for f in cfg.formats:
        if f not in ("csv", "pgm", "svg"):
            raise ConfigError(f"output.formats: unknown format {f!r}")
    for name, check in (("p1_list", _check_prob), ("p2_list", _check_prob), ("L_list", _check_L)):
        vals = getattr(cfg, name)
        if vals is None:
            continue
        if not vals:
            raise ConfigError(f"sweep.{name}: must not be empty")
        for k, v in enumerate(vals):
            check(v, f"sweep.{name}[{k}]")
    return cfg


def load_config(path) -> Config:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def header_lines(kind: str, cfg: Config | None, seed: int | None = None) -> list[str]:
    lines = [f"# bscircuit {__version__} {kind}"]
    if seed is not None:
        lines.append(f"# seed: {seed}")
    if cfg is not None:
        lines.append("# config:")
        lines.extend(f"# | {line}" for line in cfg.text.splitlines())
    return lines


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.10g}"


def sweep_row(stats: EnsembleStats) -> list[str]:
    c = stats.config
    m, e = stats.mean, stats.err
    vals = [
        c.spec.L, c.mix.p1, c.mix.p2,
        m["Xr"], e["Xr"], m["Xc"], e["Xc"], m["Zr"], e["Zr"], m["Zc"], e["Zc"],
        m["entropy_bits"], e["entropy_bits"], m["x_site_density"], m["z_site_density"],
        stats.samples, c.point_seed,
    ]
    return [fmt(v) for v in vals]


class SweepWriter:
    """Append-only sweep CSV; each row is flushed as soon as it is written."""

    def __init__(self, path, cfg: Config | None, seed: int | None = None):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = self.path.open("w", newline="")
        for line in header_lines("sweep", cfg, seed):
            self._fh.write(line + "\n")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(SWEEP_COLUMNS)
        self._fh.flush()

    def append(self, stats: EnsembleStats) -> None:
        self._writer.writerow(sweep_row(stats))
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_profile(path, stats: EnsembleStats, cfg: Config | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pm, pe = stats.profile_mean, stats.profile_err
    with path.open("w", newline="") as fh:
        for line in header_lines("profile", cfg, stats.config.master_seed):
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PROFILE_COLUMNS)
        for k in range(len(pm["X_row"])):
            w.writerow(
                [fmt(k + 1)]
                + [fmt(v) for key in ("X_row", "Z_col", "Y_row") for v in (pm[key][k], pe[key][k])]
            )


def _data_rows(path):
    """(line number, row) pairs after the header, skipping comments."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise CsvFormatError(f"{path}: {exc}") from exc
    header = None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip() or line.startswith("#"):
            continue
        row = next(csv.reader([line]))
        if header is None:
            header = row
            continue
        yield lineno, dict(zip(header, row)), header, len(row)


def read_sweep(path) -> list[dict]:
    """Parse a sweep CSV into dicts of floats (``L``/``samples``/``seed`` as int)."""
    rows = []
    for lineno, row, header, n in _data_rows(path):
        missing = [c for c in SWEEP_COLUMNS if c not in header]
        if missing:
            raise CsvFormatError(f"{path}: header lacks columns {missing}")
        if n != len(header):
            raise CsvFormatError(f"{path}:{lineno}: expected {len(header)} fields, found {n}")
        try:
            rec = {k: float(row[k]) for k in SWEEP_COLUMNS}
        except ValueError as exc:
            raise CsvFormatError(f"{path}:{lineno}: {exc}") from exc
        for k in ("L", "samples", "seed"):
            rec[k] = int(rec[k]) if k != "seed" else int(row[k])
        rows.append(rec)
    return rows


def read_profile(path) -> dict:
    cols = {c: [] for c in PROFILE_COLUMNS}
    for lineno, row, header, n in _data_rows(path):
        try:
            for c in PROFILE_COLUMNS:
                cols[c].append(float(row[c]))
        except (KeyError, ValueError) as exc:
            raise CsvFormatError(f"{path}:{lineno}: {exc}") from exc
    return {c: np.array(v) for c, v in cols.items()}


def write_collapse(directory, result, points, sources, extra: dict | None = None) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    report = {
        "version": __version__,
        "inputs": [str(s) for s in sources],
        "gamma_bar": result.gamma_bar,
        "gamma_bar_err": result.gamma_bar_err,
        "nu": result.nu,
        "nu_err": result.nu_err,
        "quality": result.quality,
        "p_c": result.p_c,
        "window": result.window,
        "sizes": sorted({pt.L for pt in points}),
        "n_points": len(points),
        "n_evaluations": len(result.trace),
        **(extra or {}),
    }
    rp = directory / "collapse.json"
    rp.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    pp = directory / "collapse_points.csv"
    with pp.open("w", newline="") as fh:
        fh.write(f"# bscircuit {__version__} collapse points\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POINT_COLUMNS)
        for pt, (L, x, y, ye) in zip(points, result.rescaled(points)):
            w.writerow([fmt(L), fmt(pt.p), fmt(x), fmt(y), fmt(ye)])
    return rp, pp


def grid_pixels(grid: SnapshotGrid) -> np.ndarray:
    lut = np.zeros(4, dtype=np.uint8)
    for code, val in PIXEL.items():
        lut[code] = val
    return lut[grid.classes]


def write_pgm(path, pixels: np.ndarray, comments=()) -> None:
    pixels = np.asarray(pixels, dtype=np.uint8)
    h, w = pixels.shape
    head = "P5\n" + "".join(f"# {c}\n" for c in comments) + f"{w} {h}\n255\n"
    with Path(path).open("wb") as fh:
        fh.write(head.encode("ascii"))
        fh.write(pixels.tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end : end + 1].isspace():
            end += 1
        tokens.append(data[pos:end].decode("ascii"))
        pos = end
    if tokens[0] != "P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval > 255:
        raise ValueError("16-bit PGM not supported")
    pos += 1
    return np.frombuffer(data[pos : pos + w * h], dtype=np.uint8).reshape(h, w)


def write_svg(path, pixels: np.ndarray, cell: int = 10) -> None:
    h, w = pixels.shape
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w * cell}" height="{h * cell}" '
        f'viewBox="0 0 {w} {h}" shape-rendering="crispEdges">'
    ]
    for i in range(h):
        for j in range(w):
            v = int(pixels[i, j])
            out.append(f'<rect x="{j}" y="{i}" width="1" height="1" fill="rgb({v},{v},{v})"/>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


def snapshot_image(grid: SnapshotGrid, path, svg_path=None, comments=()) -> np.ndarray:
    """Write the classification raster (and optionally an SVG); returns the pixels."""
    pixels = grid_pixels(grid)
    write_pgm(path, pixels, comments)
    if svg_path is not None:
        write_svg(svg_path, pixels)
    return pixels

