import json
import textwrap

import numpy as np
import pytest

from bscircuit import cli, formats
from bscircuit.formats import (
    PROFILE_COLUMNS,
    SWEEP_COLUMNS,
    ConfigError,
    CsvFormatError,
    parse_config,
    read_pgm,
    read_profile,
    read_sweep,
    snapshot_image,
)
from bscircuit.observables import BOTH, GRAY, X_SITE, Z_SITE, SnapshotGrid

BASE = """\
seed = 9
[lattice]
L = {L}
[mix]
p1 = {p1}
p2 = {p2}
[schedule]
total_steps_factor = 12
burn_in_factor = 6
sample_stride_factor = 2
n_runs = 3
"""


def write_config(tmp_path, L=8, p1=0.5, p2=0.0, extra="", name="c.toml"):
    path = tmp_path / name
    path.write_text(BASE.format(L=L, p1=p1, p2=p2) + textwrap.dedent(extra))
    return path


def data_lines(path):
    return [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]


def test_config_defaults_and_echo():
    cfg = parse_config("[lattice]\nL = 12\n")
    assert (cfg.L, cfg.boundary, cfg.p1, cfg.p2, cfg.n_runs, cfg.seed) == (12, "periodic", 0.5, 0.0, 32, 0)
    assert cfg.grid() == [(0.5, 0.0, 12)]
    lines = formats.header_lines("sweep", cfg, 0)
    assert "# | L = 12" in lines


@pytest.mark.parametrize(
    "text,key",
    [
        ("[lattice]\nL = 12\nwidth = 3\n", "lattice.width"),
        ("colour = 1\n", "colour"),
        ("[mix]\np1 = 1.5\n", "mix.p1"),
        ("[lattice]\nL = 4\n", "lattice.L"),
        ("[lattice]\nL = 12\nboundary = 'mobius'\n", "lattice.boundary"),
        ("[schedule]\nn_runs = 0\n", "schedule.n_runs"),
        ("[schedule]\nburn_in_factor = 200\n", "schedule.burn_in_factor"),
        ("[sweep]\nL_list = [12, 15]\n", "sweep.L_list[1]"),
        ("[output]\nformats = ['png']\n", "output.formats"),
        ("[mix]\np2 = 'high'\n", "mix.p2"),
    ],
)
def test_config_errors_name_the_key(text, key):
    with pytest.raises(ConfigError, match=key.replace("[", r"\[").replace("]", r"\]")):
        parse_config(text)


def test_odd_L_exits_with_message(tmp_path, capsys):
    assert cli.main(["run", "--config", str(write_config(tmp_path, L=13))]) == 1
    assert "L must be even" in capsys.readouterr().err


def test_usage_errors_exit_one(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["run"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 1
    assert cli.main(["run", "--config", str(tmp_path / "missing.toml")]) == 1


def test_run_writes_one_finite_row_deterministically(tmp_path):
    cfg = write_config(tmp_path)
    for out in ("a", "b"):
        assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / out), "--threads", "2"]) == 0
    a, b = (tmp_path / "a" / "run.csv").read_bytes(), (tmp_path / "b" / "run.csv").read_bytes()
    assert a == b
    rows = read_sweep(tmp_path / "a" / "run.csv")
    assert len(rows) == 1
    assert all(np.isfinite(v) for v in rows[0].values())
    assert data_lines(tmp_path / "a" / "run.csv")[0] == ",".join(SWEEP_COLUMNS)
    text = a.decode()
    assert "# bscircuit" in text and "# seed: 9" in text and "# | p1 = 0.5" in text


def test_seed_flag_overrides_file(tmp_path):
    cfg = write_config(tmp_path)
    cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")])
    cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "10"])
    ra, rb = read_sweep(tmp_path / "a" / "run.csv")[0], read_sweep(tmp_path / "b" / "run.csv")[0]
    assert ra["seed"] != rb["seed"]
    assert "# seed: 10" in (tmp_path / "b" / "run.csv").read_text()


def test_env_override_for_output(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["run", "--config", str(write_config(tmp_path))]) == 0
    assert (tmp_path / "env" / "run.csv").exists()


def test_sweep_two_points(tmp_path):
    cfg = write_config(tmp_path, extra="[sweep]\np1_list = [0.25]\np2_list = [0.0, 0.3]\n")
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = read_sweep(tmp_path / "sweep.csv")
    assert [(r["p1"], r["p2"]) for r in rows] == [(0.25, 0.0), (0.25, 0.3)]
    assert rows[0]["Xc"] == 0.0 and rows[0]["Xc_err"] == 0.0
    assert rows[1]["Xc"] > 0.0


def test_sweep_needs_sweep_section(tmp_path, capsys):
    assert cli.main(["sweep", "--config", str(write_config(tmp_path)), "--out", str(tmp_path)]) == 1
    assert "sweep" in capsys.readouterr().err


def test_sweep_keeps_partial_file_on_interrupt(tmp_path, monkeypatch):
    real = cli.sweep.__globals__["run_ensemble"]
    calls = []

    def flaky(config, threads=None):
        calls.append(config)
        if len(calls) == 2:
            raise KeyboardInterrupt
        return real(config, threads)

    monkeypatch.setitem(cli.sweep.__globals__, "run_ensemble", flaky)
    cfg = write_config(tmp_path, extra="[sweep]\np1_list = [0.3, 0.4, 0.5]\n")
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    rows = read_sweep(tmp_path / "sweep.csv")
    assert len(rows) == 1 and rows[0]["p1"] == 0.3


def test_profile_pure_xx(tmp_path):
    cfg = write_config(tmp_path, p1=0.0)
    assert cli.main(["profile", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert data_lines(tmp_path / "profile.csv")[0] == ",".join(PROFILE_COLUMNS)
    prof = read_profile(tmp_path / "profile.csv")
    assert list(prof["delta"]) == [1, 2, 3, 4]
    assert np.all(prof["X_row"] == 1.0) and np.all(prof["X_row_err"] == 0.0)
    assert np.all(prof["Y_row"] == 0.0)


def synthetic_sweep(path, sizes, gamma_bar=1.6, nu=0.77):
    rng = np.random.default_rng(5)
    with path.open("w") as fh:
        fh.write("# synthetic\n" + ",".join(SWEEP_COLUMNS) + "\n")
        for L in sizes:
            for p in np.round(np.arange(0.35, 0.6501, 0.01), 3):
                v = L**-gamma_bar / (1 + np.exp((p - 0.5) * L ** (1 / nu)))
                row = [L, p, 0.0, v * (1 + 0.01 * rng.normal()), 0.01 * v] + [0.0] * 10 + [100, 1]
                fh.write(",".join(formats.fmt(x) for x in row) + "\n")


def test_collapse_recovers_synthetic_exponents(tmp_path):
    synthetic_sweep(tmp_path / "s.csv", (12, 16, 20, 24))
    assert cli.main(["collapse", str(tmp_path / "s.csv"), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "collapse.json").read_text())
    assert abs(rep["gamma_bar"] - 1.6) <= rep["gamma_bar_err"]
    assert abs(rep["nu"] - 0.77) <= rep["nu_err"]
    assert rep["sizes"] == [12, 16, 20, 24]
    cloud = data_lines(tmp_path / "collapse_points.csv")
    assert cloud[0] == "L,p1,x,y,y_err" and len(cloud) == 1 + rep["n_points"]


def test_collapse_rejects_single_size(tmp_path, capsys):
    synthetic_sweep(tmp_path / "s.csv", (12,))
    assert cli.main(["collapse", str(tmp_path / "s.csv"), "--out", str(tmp_path)]) == 1
    assert "two system sizes" in capsys.readouterr().err


def test_collapse_malformed_csv_names_line(tmp_path, capsys):
    path = tmp_path / "s.csv"
    synthetic_sweep(path, (12, 16))
    lines = path.read_text().splitlines()
    lines[5] = lines[5].replace(",", ",x", 1)
    path.write_text("\n".join(lines) + "\n")
    assert cli.main(["collapse", str(path), "--out", str(tmp_path)]) == 2
    assert "s.csv:6" in capsys.readouterr().err
    with pytest.raises(CsvFormatError):
        read_sweep(path)


def test_snapshot_outputs(tmp_path):
    cfg = write_config(tmp_path, L=12, p1=0.25, p2=0.5, extra='[output]\nformats = ["csv", "pgm", "svg"]\n')
    for out in ("a", "b"):
        assert cli.main(["snapshot", "--config", str(cfg), "--out", str(tmp_path / out)]) == 0
    a = tmp_path / "a"
    assert (a / "snapshot.pgm").read_bytes() == (tmp_path / "b" / "snapshot.pgm").read_bytes()
    px = read_pgm(a / "snapshot.pgm")
    assert px.shape == (12, 12)
    assert not np.any(px == 0)
    side = (a / "snapshot.txt").read_text()
    white = np.mean((px == 255) | (px == 64))
    assert f"x_density {white:.10g}" in side
    assert (a / "snapshot.svg").read_text().startswith("<svg")


def test_raster_roundtrips(tmp_path):
    gray = SnapshotGrid(6, np.full((6, 6), GRAY, dtype=np.int8))
    px = snapshot_image(gray, tmp_path / "g.pgm")
    assert np.all(read_pgm(tmp_path / "g.pgm") == 128) and px.shape == (6, 6)
    codes = np.array([[X_SITE, Z_SITE], [Z_SITE, X_SITE]])
    board = SnapshotGrid(6, np.tile(codes, (3, 3)).astype(np.int8))
    board.classes[0, 0] = BOTH
    snapshot_image(board, tmp_path / "c.pgm", tmp_path / "c.svg", comments=["a note"])
    back = read_pgm(tmp_path / "c.pgm")
    expect = np.where(board.classes == X_SITE, 255, np.where(board.classes == Z_SITE, 0, 64))
    assert np.array_equal(back, expect)
    assert (tmp_path / "c.svg").read_text().count("<rect") == 36
