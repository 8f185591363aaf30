import json

import pytest

from gammafisher import cli
from gammafisher.io import read_grid_dump

TILTED = {"potential": {"family": "double_well", "params": {"tilt": 0.25}},
          "grid": {"resolution": 1201}, "betas": [8, 12],
          "simulate": {"beta": 6, "n_traj": 100, "occupation": {"T": 100}}}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=1))
    return path


def tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file()}


def test_landscape_subcommand(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["landscape", "--config", str(write(tmp_path, TILTED)), "--out", str(out)]) == 0
    data = json.loads((out / "landscape.json").read_text())
    assert data["n_critical_points"] == 3 and data["n_barriers"] == 1
    assert all(data["assumption_flags"][k]["passed"] for k in ("A.1", "A.4", "A.5"))
    manifest = json.loads((out / "manifest.json").read_text())
    assert sorted(f["path"] for f in manifest["files"]) == ["config_echo.json", "landscape.json"]


def test_spectrum_clusters_symmetric(tmp_path):
    cfg = {"potential": {"family": "double_well"}, "betas": [20], "Lambda": 10, "spectrum": {"epsilon": 1.0}}
    out = tmp_path / "o"
    assert cli.run("spectrum", write(tmp_path, cfg), out) == 0
    rows = (out / "clusters.csv").read_text().strip().splitlines()[1:]
    got = {float(r.split(",")[1]): (int(r.split(",")[2]), int(r.split(",")[3])) for r in rows}
    assert got == {0.0: (2, 2), 4.0: (1, 1), 8.0: (3, 3)}
    kr = (out / "kramers.csv").read_text().strip().splitlines()
    assert kr == ["beta,k,ell,prediction,ratio"]


def test_invalid_config_writes_nothing(tmp_path, capsys):
    bad = dict(TILTED, betas=[-1.0], bogus=3)
    out = tmp_path / "o"
    assert cli.run("all", write(tmp_path, bad), out) == 2
    assert not out.exists()
    err = capsys.readouterr().err
    assert "cfg.json:" in err and "bogus" in err and "betas/0" in err


def test_malformed_json(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text('{"potential": {"family": "harmonic"},\n "betas": [1,]}')
    assert cli.run("landscape", path, tmp_path / "o") == 2
    assert "cfg.json:2:" in capsys.readouterr().err


def test_unknown_family_and_dimension(tmp_path):
    cfg = {"potential": {"family": "double_well", "params": {"wobble": 1}}}
    assert cli.run("landscape", write(tmp_path, cfg), tmp_path / "o") == 2
    cfg = {"potential": {"family": "harmonic"}, "grid": {"resolution": [11, 11]}}
    assert cli.run("landscape", write(tmp_path, cfg), tmp_path / "o") == 2


def test_guard_failure_exit_code(tmp_path):
    cfg = {"potential": {"family": "double_well"}, "grid": {"resolution": 101}, "betas": [40]}
    out = tmp_path / "o"
    assert cli.run("spectrum", write(tmp_path, cfg), out) == 3
    assert (out / "manifest.json").exists()


def test_all_outputs_and_manifest(tmp_path):
    out = tmp_path / "o"
    assert cli.run("all", write(tmp_path, TILTED), out) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    listed = {f["path"] for f in manifest["files"]}
    assert listed == set(tree(out)) - {"manifest.json"}
    assert {"spectrum.json", "kramers.csv", "clusters.csv", "witness.csv", "witness.json",
            "simulate.json", "exit_times.csv", "occupation.bin"} <= listed
    header, dens = read_grid_dump((out / "occupation.bin").read_bytes())
    assert header["count"] == dens.size == 64
    sim = json.loads((out / "simulate.json").read_text())
    assert sim["exit"]["n_traj"] == 100


def test_repeat_runs_byte_identical(tmp_path):
    cfg = write(tmp_path, TILTED)
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert cli.run("all", cfg, a, seed=7) == 0
    assert cli.run("all", cfg, b, seed=7) == 0
    assert cli.run("all", cfg, c, threads=3, seed=7) == 0
    assert tree(a) == tree(b) == tree(c)
    d = tmp_path / "d"
    assert cli.run("all", cfg, d, seed=8) == 0
    assert tree(d)["exit_times.csv"] != tree(a)["exit_times.csv"]


def test_single_well_skips_exit(tmp_path):
    cfg = {"potential": {"family": "harmonic"}, "grid": {"resolution": 801}, "betas": [10],
           "simulate": {"occupation": {"T": 50}}}
    out = tmp_path / "o"
    assert cli.run("simulate", write(tmp_path, cfg), out) == 0
    sim = json.loads((out / "simulate.json").read_text())
    assert sim["exit"] is None and "exit_skipped" in sim


def test_parser_rejects_unknown_subcommand():
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["frobnicate", "--config", "x"])
