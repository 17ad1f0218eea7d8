"""End-to-end runs of the command line driver and its rate-fit helper.

Each test writes a JSON config into tmp_path, invokes main() in process,
and inspects the emitted artifacts.  One subprocess test checks the
installed console script.  Sweep fits for REF1 run over M in
{14, 18, 22, 26} for the reason given in test_resonance.
"""

import json
import math
import shutil
import subprocess
import sys

import pytest

from defectres import ConfigError
from defectres.cli import fit_rate, load_config, main

from conftest import (
    REF1_E0,
    REF1_K,
    REF1_M8_Z,
    REF3_M8_Z,
    REF4_M8_Z,
)

REF1_POT = {
    "periodic": {"cos": [0.0, 10.0]},
    "defect": {"shape": "smooth_bump", "amplitude": -8.0, "rho": 0.5},
    "symmetric": True,
}
REF3_POT = {
    "periodic": {"cos": [2.0, 10.0]},
    "defect": {"shape": "smooth_bump", "amplitude": -20.0, "rho": 0.5},
    "symmetric": True,
}
REF4_POT = {
    "periodic": {"cos": [2.0, 10.0]},
    "defect": {"shape": "smooth_bump", "amplitude": -20.0, "rho": 0.5},
    "symmetric": False,
    "half_line": True,
}
FREE_POT = {
    "periodic": {"cos": [0.0]},
    "defect": {"shape": "smooth_bump", "amplitude": 0.0, "rho": 0.5},
    "symmetric": True,
}
REF1_POT_BLOCK = {"potential": REF1_POT}


def write_config(tmp_path, name, body):
    path = tmp_path / name
    path.write_text(json.dumps(body))
    return str(path)


def read_json(path):
    return json.loads(path.read_text())


# -------------------------------------------------------------- fit_rate


def test_fit_rate_pure_exponential():
    pts = [(M, math.exp(-2.0 * M)) for M in (4.0, 6.0, 8.0, 10.0)]
    slope, stderr = fit_rate(pts)
    assert abs(slope + 2.0) < 1e-12
    assert stderr < 1e-12


def test_fit_rate_prefactor_absorbed():
    pts = [(M, 7.0 * math.exp(-3.0 * M)) for M in (2.0, 3.0, 5.0, 8.0)]
    slope, _ = fit_rate(pts)
    assert abs(slope + 3.0) < 1e-12


def test_fit_rate_needs_three_points():
    with pytest.raises(ConfigError):
        fit_rate([(4.0, 1e-3), (6.0, 1e-5)])
    # non-positive values are dropped before the count check
    with pytest.raises(ConfigError):
        fit_rate([(4.0, 1e-3), (6.0, 1e-5), (8.0, 0.0), (10.0, -1.0)])


# ------------------------------------------------------------ validation


def test_config_rejects_small_m(tmp_path):
    cfg = write_config(
        tmp_path, "bad.json", {**REF1_POT_BLOCK, "window": [4.6, 14.5], "M": 0.4}
    )
    with pytest.raises(ConfigError, match="support radius"):
        load_config(cfg, "resonance")


def test_config_rejects_bad_window(tmp_path):
    cfg = write_config(
        tmp_path, "bad.json", {**REF1_POT_BLOCK, "window": [14.5, 4.6], "M": 8.0}
    )
    with pytest.raises(ConfigError, match="window"):
        load_config(cfg, "resonance")


def test_config_rejects_unordered_m_list(tmp_path):
    cfg = write_config(
        tmp_path,
        "bad.json",
        {**REF1_POT_BLOCK, "window": [4.6, 14.5], "M_list": [8.0, 6.0]},
    )
    with pytest.raises(ConfigError, match="increasing"):
        load_config(cfg, "sweep")


def test_config_rejects_mode_mismatch(tmp_path):
    cfg = write_config(
        tmp_path,
        "bad.json",
        {**REF1_POT_BLOCK, "mode": "sweep", "window": [4.6, 14.5], "M": 8.0},
    )
    with pytest.raises(ConfigError, match="mode"):
        load_config(cfg, "bands")


def test_config_rejects_missing_fields(tmp_path):
    cfg = write_config(tmp_path, "bad.json", {**REF1_POT_BLOCK, "window": [4.6, 14.5]})
    with pytest.raises(ConfigError, match="M"):
        load_config(cfg, "resonance")
    cfg2 = write_config(tmp_path, "bad2.json", {"potential": REF4_POT,
                                                "window": [-3.0, 0.5], "M": 8.0})
    with pytest.raises(ConfigError, match="whole-line"):
        load_config(cfg2, "bound")


def test_malformed_config_exits_2(tmp_path, capsys):
    cfg = write_config(
        tmp_path, "bad.json", {**REF1_POT_BLOCK, "window": [4.6, 14.5], "M": 0.4}
    )
    rc = main(["resonance", "--config", cfg, "--out-dir", str(tmp_path)])
    assert rc == 2
    assert "support radius" in capsys.readouterr().err


# ------------------------------------------------------------ subcommands


def test_bands_free_potential(tmp_path):
    cfg = write_config(
        tmp_path, "bands.json", {"potential": FREE_POT, "window": [0.1, 50.0]}
    )
    rc = main(["bands", "--config", cfg, "--out-dir", str(tmp_path / "out")])
    assert rc == 0
    doc = read_json(tmp_path / "out" / "bands.json")
    assert doc["edges"] == []
    assert [iv["kind"] for iv in doc["intervals"]] == ["band"]
    assert len(doc["config_hash"]) == 64
    csv_lines = (tmp_path / "out" / "bands.csv").read_text().splitlines()
    assert csv_lines[0].startswith("# config_hash: " + doc["config_hash"])
    assert csv_lines[2].split(",")[0] != ""


def test_bands_rerun_is_byte_identical(tmp_path):
    cfg = write_config(
        tmp_path, "bands.json", {"potential": FREE_POT, "window": [0.1, 50.0]}
    )
    assert main(["bands", "--config", cfg, "--out-dir", str(tmp_path / "a")]) == 0
    assert main(["bands", "--config", cfg, "--out-dir", str(tmp_path / "b")]) == 0
    for name in ("bands.json", "bands.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_defect_subcommand(tmp_path):
    cfg = write_config(
        tmp_path, "defect.json", {**REF1_POT_BLOCK, "window": [4.6, 14.5]}
    )
    out = tmp_path / "out"
    rc = main(["defect", "--config", cfg, "--out-dir", str(out)])
    assert rc == 0
    doc = read_json(out / "defect.json")
    assert len(doc["modes"]) == 1
    m = doc["modes"][0]
    assert abs(m["E"] - REF1_E0) < 1e-9
    assert m["parity"] == "even"
    assert abs(m["k"] - REF1_K) < 1e-9
    assert abs(m["k_fit"] / m["k"] - 1.0) < 0.02
    lines = (out / m["profile_csv"]).read_text().splitlines()
    assert lines[0] == "# config_hash: " + doc["config_hash"]
    header = next(l for l in lines if not l.startswith("#"))
    assert header == "x,phi,dphi"
    assert len(lines) > 100


def test_resonance_subcommand(tmp_path):
    cfg = write_config(
        tmp_path, "res.json", {**REF1_POT_BLOCK, "window": [4.6, 14.5], "M": 8.0}
    )
    out = tmp_path / "out"
    rc = main(["resonance", "--config", cfg, "--out-dir", str(out)])
    assert rc == 0
    doc = read_json(out / "resonance.json")
    assert doc["config_hash"]
    (rec,) = doc["solves"]
    assert abs(complex(*rec["z_star"]) - REF1_M8_Z) < 1e-10
    assert rec["w_star"] is None
    assert rec["residual"] < 1e-12
    assert rec["converged"] is True
    assert rec["lifetime"] == pytest.approx(1.0 / (2.0 * abs(REF1_M8_Z.imag)), rel=1e-9)
    z1 = complex(*rec["asymptotic_z1"])
    assert abs(z1 - REF1_E0) < abs(complex(*rec["z_star"]) - REF1_E0) * 2.0


def test_bound_subcommand(tmp_path):
    cfg = write_config(
        tmp_path, "bound.json", {"potential": REF3_POT, "window": [-3.0, 0.5], "M": 8.0}
    )
    out = tmp_path / "out"
    rc = main(["bound", "--config", cfg, "--out-dir", str(out)])
    assert rc == 0
    (rec,) = read_json(out / "bound.json")["solves"]
    assert abs(rec["z_star"][0] - REF3_M8_Z) < 1e-10
    assert rec["z_star"][1] == 0.0
    assert rec["lifetime"] is None
    assert rec["solver"] == "bound"
    assert rec["margin"] == pytest.approx(1.0, abs=1e-6)


def test_edge_subcommand(tmp_path):
    cfg = write_config(
        tmp_path, "edge.json", {"potential": REF4_POT, "window": [-3.0, 0.5], "M": 8.0}
    )
    out = tmp_path / "out"
    rc = main(["edge", "--config", cfg, "--out-dir", str(out)])
    assert rc == 0
    (rec,) = read_json(out / "edge.json")["solves"]
    assert abs(rec["z_star"][0] - REF4_M8_Z) < 1e-10
    assert rec["z_star"][1] == 0.0
    assert rec["solver"] == "edge"
    assert rec["w_star"] is None
    assert rec["margin"] > 1.0


def test_sweep_subcommand(tmp_path):
    cfg = write_config(
        tmp_path,
        "sweep.json",
        {**REF1_POT_BLOCK, "window": [4.6, 14.5], "M_list": [14.0, 18.0, 22.0, 26.0]},
    )
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["sweep", "--config", cfg, "--out-dir", str(out_a)]) == 0
    doc = read_json(out_a / "sweep.json")
    k = doc["k"]
    assert abs(k - REF1_K) < 1e-9

    fit = doc["fits"]["err_vs_E"]
    assert fit["target"] == pytest.approx(-2.0 * k)
    assert fit["rel_dev"] < 0.10
    assert fit["stderr"] > 0.0
    assert fit["excluded_M"] == []
    assert doc["fits"]["err_vs_asymptotic"]["rel_dev"] < 0.20
    assert doc["fits"]["abs_theta_at_E"]["rel_dev"] < 0.05
    assert doc["fits"]["abs_d_theta_at_E"]["rel_dev"] < 0.05
    # the ball exp(-k M)/M^2 is still tighter than C exp(-2 k M)
    # throughout this window (capture starts near M ~ 35 for k ~ 0.21)
    assert doc["m_min_in_omega"] is None
    assert doc["noise_floor"] > 0.0
    assert [row["M"] for row in doc["rows"]] == [14.0, 18.0, 22.0, 26.0]

    lines = (out_a / "sweep.csv").read_text().splitlines()
    assert lines[0] == "# config_hash: " + doc["config_hash"]
    header = next(l for l in lines if not l.startswith("#"))
    assert header.split(",")[:5] == ["M", "re_z", "im_z", "abs_err_vs_E",
                                     "abs_err_vs_asymptotic"]

    assert main(["sweep", "--config", cfg, "--out-dir", str(out_b)]) == 0
    for name in ("sweep.json", "sweep.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_sweep_threads_match_serial(tmp_path):
    body = {
        "potential": REF3_POT,
        "window": [-3.0, 0.5],
        "M_list": [6.0, 8.0, 10.0],
    }
    cfg = write_config(tmp_path, "sweep.json", body)
    out_a, out_b = tmp_path / "serial", tmp_path / "par"
    assert main(["sweep", "--config", cfg, "--out-dir", str(out_a)]) == 0
    assert main(["sweep", "--config", cfg, "--out-dir", str(out_b),
                 "--threads", "3"]) == 0
    assert (out_a / "sweep.json").read_bytes() == (out_b / "sweep.json").read_bytes()


# ------------------------------------------------------------- exit codes


def test_nonconvergence_exits_3(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        "bound.json",
        {
            "potential": REF3_POT,
            "window": [-3.0, 0.5],
            "M": 8.0,
            "tolerances": {"max_iter": 1},
        },
    )
    rc = main(["bound", "--config", cfg, "--out-dir", str(tmp_path / "out")])
    assert rc == 3
    assert "solver failure" in capsys.readouterr().err


def test_no_matching_mode_exits_4(tmp_path, capsys):
    # REF3's window holds only a negative-energy mode, so asking for
    # resonances (E > 0) violates the precondition
    cfg = write_config(
        tmp_path, "res.json", {"potential": REF3_POT, "window": [-3.0, 0.5], "M": 8.0}
    )
    rc = main(["resonance", "--config", cfg, "--out-dir", str(tmp_path / "out")])
    assert rc == 4
    assert "precondition" in capsys.readouterr().err


# ---------------------------------------------------------- console script


def test_console_script_smoke(tmp_path):
    exe = shutil.which("defectres")
    if exe is None:
        pytest.skip("console script not on PATH")
    cfg = write_config(
        tmp_path, "bands.json", {"potential": FREE_POT, "window": [0.1, 50.0]}
    )
    proc = subprocess.run(
        [exe, "bands", "--config", cfg, "--out-dir", str(tmp_path / "out")],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "out" / "bands.json").exists()
    assert "bands.json" in proc.stdout
