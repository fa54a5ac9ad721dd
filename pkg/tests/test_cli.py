import csv
import json

import pytest

from bosefrag import cli
from bosefrag.models import synthetic_quartic


@pytest.fixture
def h1(tmp_path):
    path = tmp_path / "h1.json"
    path.write_text(json.dumps(synthetic_quartic(1, 0).to_json()))
    return path


def run(*argv):
    return cli.main([str(a) for a in argv])


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_pipeline_outputs(h1, tmp_path):
    out = tmp_path / "run"
    code = run("pipeline", "-i", h1, "--nmax", 12, "--t-total", 40, "--dt", 0.5,
               "--sweep-dt", "--out", out)
    assert code == cli.EXIT_OK
    for name in ("fragments.json", "trajectory.csv", "trotter_sweep.csv", "spectrum.csv",
                 "circuits.json", "compare.json", "manifest.json"):
        assert (out / name).exists(), name
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == cli.REFERENCE_SEED
    assert manifest["tol_cm"] == cli.DEFAULT_TOL
    assert manifest["n_max"] == [12]
    assert "version" in manifest
    frag = json.loads((out / "fragments.json").read_text())
    assert frag["residual_norm"] < 0.1
    spectrum = read_rows(out / "spectrum.csv")
    assert list(spectrum[0]) == ["level", "exact_cm", "heff_cm", "difference_cm"]
    assert all(abs(float(r["difference_cm"])) < 1 for r in spectrum)
    sweep = read_rows(out / "trotter_sweep.csv")
    errs = [float(r["trotter_error"]) for r in sweep]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    traj = read_rows(out / "trajectory.csv")
    assert {"t_au", "t_fs", "x0_exact", "x0_trotter", "left_exact", "right_exact",
            "overlap_error"} <= set(traj[0])
    circuits = json.loads((out / "circuits.json").read_text())
    assert circuits["circuits"][0]["n_modes"] == 1
    compare = json.loads((out / "compare.json").read_text())
    assert compare["bosonic_fragments"] <= compare["fc_groups"]


def test_determinism(h1, tmp_path):
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert run("pipeline", "-i", h1, "--nmax", 10, "--t-total", 20, "--dt", 1.0, "--out", out) == 0
    for name in ("fragments.json", "circuits.json", "compare.json", "spectrum.csv", "trajectory.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name


def test_subcommands_from_fragment_file(h1, tmp_path):
    f = tmp_path / "f"
    assert run("fragment", "-i", h1, "--out", f) == 0
    frags = f / "fragments.json"
    assert run("eigen", "-i", frags, "--t", 1.0, "--levels", 3, "--nmax", 10, "--out", tmp_path / "e") == 0
    assert len(read_rows(tmp_path / "e" / "spectrum.csv")) == 3
    assert run("compile", "-i", frags, "--out", tmp_path / "c") == 0
    assert run("compare", "-i", frags, "--nmax", 3, "--out", tmp_path / "q") == 0
    assert run("simulate", "-i", frags, "--nmax", 10, "--t-fs", 1.0, "--dt", 2.0,
               "--displacement", 0.5, "--out", tmp_path / "s") == 0
    man = json.loads((tmp_path / "s" / "manifest.json").read_text())
    assert man["summary"]["t_total_au"] == pytest.approx(1.0 / 0.02418884254)


def test_report_renders_figures(h1, tmp_path):
    out = tmp_path / "r"
    assert run("pipeline", "-i", h1, "--nmax", 10, "--t-total", 20, "--dt", 1.0,
               "--sweep-dt", "--out", out) == 0
    assert run("report", "--out", out) == 0
    for png in ("trajectory.png", "trotter_sweep.png", "spectrum.png"):
        assert (out / png).stat().st_size > 0


def test_config_errors(h1, tmp_path, capsys):
    out = tmp_path / "bad"
    assert run("fragment", "-i", tmp_path / "missing.json", "--out", out) == cli.EXIT_CONFIG
    err = json.loads((out / "error.json").read_text())
    assert err["exit_code"] == cli.EXIT_CONFIG and err["stage"] == "input"
    assert run("fragment", "-i", h1, "--tol", -1, "--out", out) == cli.EXIT_CONFIG
    assert run("simulate", "-i", h1, "--dt", 5, "--t-total", 1, "--out", out) == cli.EXIT_CONFIG
    assert run("fragment", "--out", out) == cli.EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text('{"something": 1}')
    assert run("fragment", "-i", bad, "--out", out) == cli.EXIT_CONFIG
    capsys.readouterr()


def test_tolerance_not_met(h1, tmp_path):
    out = tmp_path / "t"
    code = run("fragment", "-i", h1, "--tol", 1e-12, "--out", out)
    assert code == cli.EXIT_TOLERANCE
    assert json.loads((out / "error.json").read_text())["stage"] == "fragment"


def test_tropolone_preset_config():
    args = cli.build_parser().parse_args(["tropolone"])
    cfg = cli._config(args)
    assert cfg.tol == cli.TROPOLONE_TOL
    assert (cfg.generator_bound, cfg.displacement_bound) == cli.TROPOLONE_BOUNDS
    assert cfg.analytic_gradient
    cfg = cli._config(cli.build_parser().parse_args(["fragment", "-i", "x.json"]))
    assert cfg.tol == cli.DEFAULT_TOL
    assert cfg.generator_bound == 2.0
