"""End-to-end checks of the experiment harness: exit codes, the run
registry layout, schema-checked CSVs and rerun determinism."""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from torusnls.cli import main

REPO = Path(__file__).resolve().parents[1]


def write_config(tmp_path, text):
    path = tmp_path / "config.toml"
    path.write_text(text)
    return path


SIMULATE_PLANEWAVE = """
[grid]
max_mode = 8
[equation]
p = 5
sign = "defocusing"
[stepper]
dt = 1e-3
scheme = "strang_split"
record_every = 100
[experiment]
t_end = 0.5
initial = { type = "plane_wave", mode = 1, amplitude = 1.0 }
"""


def test_simulate_plane_wave_passes(tmp_path):
    cfg = write_config(tmp_path, SIMULATE_PLANEWAVE)
    out = tmp_path / "runs"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    (run_dir,) = [d for d in out.iterdir() if d.is_dir()]
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["validation"]["plane_wave_phase_error"]["passed"]
    assert manifest["validation"]["mass_conservation_rel"]["passed"]
    assert "trajectory.csv" in manifest["outputs"]
    assert (run_dir / "snapshots.bin").exists()


def test_rerun_is_byte_identical(tmp_path):
    cfg = write_config(tmp_path, SIMULATE_PLANEWAVE)
    out = tmp_path / "runs"
    main(["simulate", "--config", str(cfg), "--out", str(out)])
    (run_dir,) = [d for d in out.iterdir() if d.is_dir()]
    first = (run_dir / "trajectory.csv").read_bytes()
    main(["simulate", "--config", str(cfg), "--out", str(out)])
    assert (run_dir / "trajectory.csv").read_bytes() == first


def test_malformed_config_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, SIMULATE_PLANEWAVE.replace("p = 5", "p = 4"))
    out = tmp_path / "runs"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 2
    assert "equation.p" in capsys.readouterr().err
    assert not any(out.glob("*/*.csv"))


def test_missing_required_key_names_path(tmp_path, capsys):
    cfg = write_config(tmp_path, SIMULATE_PLANEWAVE.replace("t_end = 0.5", ""))
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 2
    assert "experiment.t_end" in capsys.readouterr().err


RESONANCE_SMALL = """
[experiment]
box = 6
p = 5
[constants]
c_B = 0.2
c_C = 0.2
r_comp = 0.4
gap = 2.0
"""


def test_resonance_validated_constants_pass(tmp_path):
    cfg = write_config(tmp_path, RESONANCE_SMALL)
    out = tmp_path / "runs"
    assert main(["resonance", "--config", str(cfg), "--out", str(out)]) == 0
    (run_dir,) = [d for d in out.iterdir() if d.is_dir()]
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["validation"]["lemma_violations"]["value"] == 0.0
    body = (run_dir / "decomposition.csv").read_text().splitlines()
    assert body[0] == "box,p,c_B,c_C,r_comp,gap,violations,min_ratio,wall_time_ms"


def test_resonance_loose_constants_fail_honestly(tmp_path):
    """The loose constants are refuted by enumeration; the harness must
    exit 1 and record the counterexamples rather than massage the check."""
    cfg = write_config(
        tmp_path, RESONANCE_SMALL.replace("c_B = 0.2", "c_B = 0.5")
        .replace("c_C = 0.2", "c_C = 1.0").replace("r_comp = 0.4", "r_comp = 0.5")
        .replace("box = 6", "box = 13"),
    )
    out = tmp_path / "runs"
    assert main(["resonance", "--config", str(cfg), "--out", str(out)]) == 1
    (run_dir,) = [d for d in out.iterdir() if d.is_dir()]
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert not manifest["validation"]["lemma_violations"]["passed"]
    assert (run_dir / "violations.json").exists()


def test_report_aggregates(tmp_path, capsys):
    out = tmp_path / "runs"
    main(["simulate", "--config", str(write_config(tmp_path, SIMULATE_PLANEWAVE)),
          "--out", str(out)])
    assert main(["report", "--out", str(out)]) == 0
    captured = capsys.readouterr().out
    assert "plane_wave_phase_error" in captured
    assert (out / "summary.csv").exists()


def test_seed_override_changes_data(tmp_path):
    base = """
[grid]
max_mode = 16
[equation]
p = 5
sign = "defocusing"
gamma = 0.5
[stepper]
dt = 1e-3
record_every = 50
[experiment]
t_end = 0.1
initial = { type = "random_sobolev", s = 0.8, delta_rough = 0.05, seed = 1, norm = 1.0 }
"""
    cfg = write_config(tmp_path, base)
    out = tmp_path / "runs"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    (run_dir,) = [d for d in out.iterdir() if d.is_dir()]
    first = (run_dir / "trajectory.csv").read_bytes()
    assert main(["simulate", "--config", str(cfg), "--out", str(out),
                 "--seed-override", "99"]) == 0
    assert (run_dir / "trajectory.csv").read_bytes() != first


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "torusnls", "simulate"],
        capture_output=True, text=True, cwd=REPO,
    )
    assert proc.returncode == 2
    assert "config" in proc.stderr


DISSIPATION_SMALL = """
[grid]
max_mode = 32
[equation]
p = 5
sign = "defocusing"
gamma = 0.5
forcing = [[1, 0.25, 0.0], [-1, 0.25, 0.0]]
[stepper]
dt = 2e-4
[experiment]
mode = "dissipation"
dts = [4e-4, 2e-4]
t_end = 0.02
initial = { type = "random_sobolev", s = 1.2, delta_rough = 0.05, seed = 1, norm = 1.0 }
"""


def test_attractor_dissipation_mode(tmp_path):
    cfg = write_config(tmp_path, DISSIPATION_SMALL)
    out = tmp_path / "runs"
    assert main(["attractor", "--config", str(cfg), "--out", str(out)]) == 0
    (run_dir,) = [d for d in out.iterdir() if d.is_dir()]
    manifest = json.loads((run_dir / "manifest.json").read_text())
    for name in ("mass_residual_rel", "energy_residual_rel",
                 "mass_residual_order", "energy_residual_order", "decay_law_rel"):
        assert manifest["validation"][name]["passed"], name
    assert (run_dir / "residual_order.csv").exists()


def test_attractor_rejects_unknown_mode(tmp_path, capsys):
    cfg = write_config(tmp_path, DISSIPATION_SMALL.replace('"dissipation"', '"bogus"'))
    assert main(["attractor", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 2
    assert "experiment.mode" in capsys.readouterr().err


def test_threads_do_not_change_results(tmp_path):
    cfg = write_config(tmp_path, DISSIPATION_SMALL)
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(["attractor", "--config", str(cfg), "--out", str(out1)]) == 0
    assert main(["attractor", "--config", str(cfg), "--out", str(out2),
                 "--threads", "2"]) == 0
    (d1,) = [d for d in out1.iterdir() if d.is_dir()]
    (d2,) = [d for d in out2.iterdir() if d.is_dir()]
    assert (d1 / "residual_order.csv").read_bytes() == (d2 / "residual_order.csv").read_bytes()
