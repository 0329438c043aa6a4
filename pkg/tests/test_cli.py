import csv
import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from fracwave.cli import DEFAULTS, config_hash, load_config, main
from fracwave.field import GridSpec
from fracwave.solver import InitialData, propagate_linear


def run(tmp_path, name, *args):
    out = tmp_path / name
    code = main([args[0], "--out", str(out), *args[1:]])
    return code, out


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_admiss_is_byte_stable(tmp_path):
    c1, o1 = run(tmp_path, "a", "admiss")
    c2, o2 = run(tmp_path, "b", "admiss")
    assert c1 == c2 == 0
    assert (o1 / "admiss.csv").read_bytes() == (o2 / "admiss.csv").read_bytes()
    rows = read_csv(o1 / "admiss.csv")
    assert rows[0][:4] == ["d", "s", "q", "r"]
    d5 = [r for r in rows[1:] if r[0] == "5" and r[1] == "1/2"]
    assert d5 and d5[0][2] == "3" and d5[0][4] == "3/2"


def test_manifest_indexes_outputs(tmp_path):
    code, out = run(tmp_path, "m", "admiss", "--set", "admiss.d_range=[2,3]")
    man = json.loads((out / "manifest.json").read_text())
    assert code == 0 and man["status"] == "ok" and man["command"] == "admiss"
    for entry in man["files"]:
        assert hashlib.sha256((out / entry["file"]).read_bytes()).hexdigest() == entry["sha256"]
    assert man["config_hash"] == config_hash(man["config"])


def test_sigma_zero_time_row_and_border_fit(tmp_path):
    code, out = run(tmp_path, "s", "sigma", "--set", "time.t_values=[0.0,0.5,0.75,1.0]",
                    "--set", "lattice.n_levels=[2,3,4,5,6]")
    assert code == 0
    rows = read_csv(out / "sigma.csv")[1:]
    assert all(float(r[2]) == 0.0 for r in rows if float(r[1]) == 0.0)
    fit = json.loads((out / "sigma_fit.json").read_text())
    assert fit["regime"] == "LINEAR"


def test_sigma_subcritical_rate(tmp_path):
    code, out = run(tmp_path, "s", "sigma", "--set", "model.hurst=[0.45,0.45,0.45]",
                    "--set", "lattice.n_levels=[2,3,4,5,6,7,8,9]")
    fit = json.loads((out / "sigma_fit.json").read_text())
    assert code == 0 and fit["regime"] == "GEOMETRIC"
    assert abs(fit["fitted_rate"] - 0.3) <= 0.1


def test_csv_values_round_trip(tmp_path):
    from fracwave.lattice import HurstVector
    from fracwave.renorm import sigma_curve

    code, out = run(tmp_path, "s", "sigma", "--set", "lattice.n_levels=[2,3]")
    rows = read_csv(out / "sigma.csv")[1:]
    curve = sigma_curve(HurstVector((0.5, 0.5, 0.5)), [2, 3], DEFAULTS["time"]["t_values"], 1e-6)
    assert [float(r[2]) for r in rows] == [v for _, _, v, _ in curve.rows()]


def test_converge_single_level_writes_header_only(tmp_path):
    code, out = run(tmp_path, "c", "converge", "--set", "lattice.n_levels=[4]")
    assert code == 0
    assert read_csv(out / "rates.csv") == [["n_from", "n_to", "norm", "value", "error"]]


def test_converge_cauchy_pass_and_fail(tmp_path):
    base = ["--set", "model.d=1", "--set", "model.hurst=[0.2,0.25]", "--set", "converge.study='cauchy'"]
    code, out = run(tmp_path, "ok", "converge", *base, "--set", "lattice.n_levels=[2,3,4,5,6]")
    assert code == 0 and len(read_csv(out / "rates.csv")) == 5
    # Wick squares rise before they decay: levels 1..4 are a FAIL, which must exit nonzero
    code, out = run(tmp_path, "fail", "converge", *base, "--set", "converge.order=2",
                    "--set", "lattice.n_levels=[1,2,3,4]")
    assert code == 4
    assert json.loads((out / "manifest.json").read_text())["status"] == "fail"


def test_solve_with_zero_cutoff(tmp_path):
    code, out = run(tmp_path, "u", "solve", "--set", "model.hurst=[0.8,0.8,0.8]", "--set", "lattice.n_levels=[3]",
                    "--set", "grid.points_per_axis=32", "--set", "time.steps=16", "--set", "rho.amplitude=0.0")
    assert code == 0
    side = json.loads((out / "u_n3.json").read_text())
    shape = tuple(side["shape"])
    u = np.fromfile(out / "u_n3.bin", dtype="<f8").reshape(shape)
    psi = np.fromfile(out / "psi_n3.bin", dtype="<f8").reshape(shape)
    g = GridSpec(2, 32, 2.0)
    x2 = g.radius() ** 2
    data = InitialData(0.2 * np.exp(-x2 / (2 * 0.25 ** 2)), np.zeros(g.shape), g)
    lin = propagate_linear(data, side["times"])[0]
    assert np.max(np.abs(u - psi - lin)) < 1e-12


def test_sample_is_deterministic(tmp_path):
    args = ["sample", "--set", "model.hurst=[0.45,0.5,0.5]", "--set", "lattice.n_levels=[2]",
            "--set", "grid.points_per_axis=16", "--set", "time.steps=2", "--set", "mc.realizations=2"]
    c1, o1 = run(tmp_path, "a", *args)
    c2, o2 = run(tmp_path, "b", *args)
    assert c1 == c2 == 0
    for f in ("psi_n2_r0.bin", "psi_n2_r1.bin"):
        assert (o1 / f).read_bytes() == (o2 / f).read_bytes()
    assert (o1 / "psi_n2_r0.bin").read_bytes() != (o1 / "psi_n2_r1.bin").read_bytes()


@pytest.mark.parametrize("args", [
    ["solve", "--set", "model.hurst=[0.3,0.3,0.3]"],
    ["solve", "--set", "model.hurst=[0.45,0.5,0.5]", "--set", "model.mode='REGULAR'"],
    ["sigma", "--set", "model.bogus=1"],
    ["sigma", "--set", "model.hurst=[0.5,0.5]"],
    ["sigma", "--set", "lattice.n_levels=nope"],
])
def test_config_errors_exit_2(tmp_path, args):
    code, _ = run(tmp_path, "e", *args)
    assert code == 2


def test_config_file_and_overrides(tmp_path):
    cfg_file = tmp_path / "run.toml"
    cfg_file.write_text('[model]\nd = 1\nhurst = [0.35, 0.45]\n[lattice]\nn_levels = [2, 3]\n')
    cfg = load_config(str(cfg_file), ["lattice.n_levels=[2,3,4]"])
    assert cfg["model"]["hurst"] == [0.35, 0.45] and cfg["lattice"]["n_levels"] == [2, 3, 4]
    bad = tmp_path / "bad.toml"
    bad.write_text("[model\n")
    assert main(["sigma", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2


def test_verify_subset(tmp_path):
    code, out = run(tmp_path, "v", "verify", "--only", "1,5")
    assert code == 0
    rep = json.loads((out / "acceptance.json").read_text())
    assert [r["passed"] for r in rep] == [True, True]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fracwave", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("sample", "sigma", "converge", "solve", "admiss", "verify"):
        assert cmd in proc.stdout


def test_converge_solver_study(tmp_path):
    code, out = run(tmp_path, "cs", "converge", "--set", "model.hurst=[0.8,0.8,0.8]", "--set", "lattice.n_levels=[2,3]",
                    "--set", "grid.points_per_axis=32", "--set", "time.steps=32", "--set", "solver.probe_uniqueness=false")
    rows = read_csv(out / "rates.csv")
    assert code in (0, 4) and len(rows) == 2 and rows[1][:2] == ["2", "3"]
    rep = json.loads((out / "convergence.json").read_text())
    assert float(rows[1][3]) == rep["differences"][0]
