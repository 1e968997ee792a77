from pathlib import Path

import pytest

from lcms.cli import load_config, main, run_scenario

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.mark.parametrize("name,code", [
    ("mechanics", 0), ("mechanics_decay", 0), ("scalar_field", 0), ("harmonic", 0),
    ("harmonic_negative", 0), ("reduced_hj", 0), ("hj_verify", 0), ("hj_perturbed", 1),
    ("identity_suite", 0),
])
def test_config_exit_codes(tmp_path, name, code):
    assert main(["run", str(CONFIGS / f"{name}.ini"), "--out", str(tmp_path)]) == code
    assert (tmp_path / f"{name}_report.txt").exists()


def test_cauchy_config(tmp_path):
    assert main(["run", str(CONFIGS / "cauchy.ini"), "--out", str(tmp_path)]) == 0


def test_csv_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        main(["run", str(CONFIGS / "mechanics.ini"), "--out", str(d), "--seed", "7"])
    csvs = sorted(p.name for p in a.glob("*.csv"))
    assert csvs
    for n in csvs:
        assert (a / n).read_bytes() == (b / n).read_bytes()


def test_missing_file_is_config_error(tmp_path):
    assert main(["run", str(tmp_path / "nope.ini"), "--out", str(tmp_path)]) == 2


def test_bad_expression_is_config_error(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text((CONFIGS / "mechanics.ini").read_text().replace("H = 0.5*pt^2", "H = 0.5*pt^^2"))
    assert main(["run", str(cfg), "--out", str(tmp_path)]) == 2


def test_unknown_kind(tmp_path):
    cfg = tmp_path / "k.ini"
    cfg.write_text("[scenario]\nkind = teleport\n")
    assert main(["run", str(cfg), "--out", str(tmp_path)]) == 2


def test_tolerance_scale_can_fail_a_run(tmp_path):
    cfg = load_config(CONFIGS / "mechanics.ini")
    cfg.tolerance_scale = 1e-12
    rep = run_scenario(cfg, tmp_path)
    assert rep.status == 1 and "FAIL" in rep.to_text()


def test_numeric_abort_exit_code(tmp_path):
    cfg = tmp_path / "blow.ini"
    cfg.write_text("[scenario]\nkind = mechanics\n[chart]\nm = 1\nN = 1\n[hamiltonian]\nH = u^2*pt\n"
                   "[run]\nT = 3\ndt = 0.1\nsigma0 = 1\np0 = 1\n")
    assert main(["run", str(cfg), "--out", str(tmp_path)]) == 3
