import csv
import json
import subprocess
import sys

import numpy as np
import pytest

import ptspectra.discretize
from ptspectra import cli, verification
from ptspectra.errors import ConfigError


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
    return p


def test_track_jordan_csv(tmp_path, capsys):
    cfg = write(tmp_path, {"task": "track", "family": "jordan2x2", "k": 2, "epsilon": {"max": 1.0, "steps": 10}})
    assert cli.main(["--out-dir", str(tmp_path), "run", str(cfg)]) == 0
    with open(tmp_path / "track_branches.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 22
    assert rows[0].keys() == {"epsilon", "branch_id", "re", "im", "residual", "verdict", "flags"}
    for row in rows:
        e = float(row["epsilon"])
        assert abs(abs(float(row["im"])) - np.sqrt(e * (e + 2))) <= 1e-10
    assert "collision" in rows[0]["flags"]
    report = json.loads((tmp_path / "track_report.json").read_text())
    assert report["inputs"]["family"] == "jordan2x2" and "seed" in report
    assert json.loads(capsys.readouterr().out)["files"] == ["track_branches.csv"]


def test_malformed_json_reports_byte_offset(tmp_path, capsys):
    cfg = write(tmp_path, '{"task": "track", "k": 2,, }')
    assert cli.main(["run", str(cfg)]) == 1
    err = capsys.readouterr().err
    assert "malformed JSON at byte 25" in err


@pytest.mark.parametrize("cfg, path", [
    ({"task": "stability", "family": "harmonic", "E": 1, "r": -1, "epsilons": [0.1]}, "$.r"),
    ({"task": "track", "family": "harmonic", "k": 0}, "$.k"),
    ({"task": "track", "family": "harmonic", "discretization": {"type": "grid", "half_width": 5}},
     "$.discretization"),
    ({"task": "track", "family": "harmonic", "bogus": 1}, "$"),
    ({"task": "track", "family": "harmonic", "epsilon": {"values": [0.1, 0.2]}}, "$.epsilon.values"),
])
def test_schema_errors_name_the_field(cfg, path):
    with pytest.raises(ConfigError) as exc:
        cli.validate_config(cfg)
    assert str(exc.value).startswith(path + ":")


def test_missing_required_fields():
    with pytest.raises(ConfigError, match="'E' is a required property"):
        cli.validate_config({"task": "rspe", "family": "harmonic_quartic", "order": 3})


@pytest.mark.parametrize("task_cfg", [
    {"task": "track", "family": "cubic_i", "discretization": {"type": "basis", "n_modes": 60, "omega": 0.6},
     "k": 3, "epsilon": {"max": 0.1, "steps": 5}},
    {"task": "stability", "family": "double_well", "discretization": {"type": "basis", "n_modes": 120, "omega": 3.5},
     "E": 1, "r": 0.6, "epsilons": [0.1, 0.05]},
])
def test_output_independent_of_threads(tmp_path, task_cfg):
    cfg = write(tmp_path, task_cfg)
    outs = []
    for t in ("1", "4"):
        d = tmp_path / f"t{t}"
        assert cli.main(["run", str(cfg), "--threads", t, "--out-dir", str(d)]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outs[0] == outs[1]


def test_rspe_task(tmp_path):
    cfg = write(tmp_path, {"task": "rspe", "family": "harmonic_quartic", "E": 1, "order": 4,
                           "discretization": {"type": "basis", "n_modes": 60},
                           "reference": {"type": "basis", "n_modes": 90}})
    assert cli.main(["run", str(cfg), "--out-dir", str(tmp_path)]) == 0
    out = json.loads((tmp_path / "rspe_rspe.json").read_text())
    assert out["verdict"] == "real_series"
    assert out["a"][1] == pytest.approx([0.75, 0.0], abs=1e-12)


def test_audit_task_uses_seed(tmp_path):
    cfg = write(tmp_path, {"task": "audit", "family": "cubic_i", "discretization": {"type": "grid", "half_width": 8,
                                                                                    "n_points": 200}})
    texts = []
    for seed in ("3", "3", "4"):
        d = tmp_path / seed
        cli.main(["run", str(cfg), "--seed", seed, "--out-dir", str(d)])
        texts.append((d / "audit_audit.json").read_text())
    assert texts[0] == texts[1]
    out = json.loads(texts[0])
    assert out["pt_residual"] <= 1e-12
    assert json.loads((tmp_path / "4" / "audit_report.json").read_text())["seed"] == 4
    # p^2 + i x^3 has a constant even part: the polynomial criterion does not apply
    assert out["theorem22"]["reason"] == "V_constant"


def test_audit_polynomial_criterion_applies(tmp_path):
    cfg = {"task": "audit", "family": "poly_lq", "discretization": {"type": "basis", "n_modes": 40, "omega": 0.6}}
    out = json.loads(cli.run(cfg, tmp_path) and (tmp_path / "audit_audit.json").read_text())
    assert out["theorem22"] == {"applicable": True, "l": 3, "r": 1, "reason": ""}


def test_verify_empty_subset(capsys):
    with pytest.warns(UserWarning):
        assert verification.verify_all([]) == []
    assert cli.main(["verify", "--only", ""]) == 0
    cap = capsys.readouterr()
    assert "0/0 criteria passed" in cap.out and "warning" in cap.err


def test_verify_subset(capsys):
    assert cli.main(["verify", "--only", "1,3"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("[PASS]  1") and out[1].startswith("[PASS]  3")


def test_catalog_list(capsys):
    assert cli.main(["catalog", "--list"]) == 0
    names = [line.split(":")[0] for line in capsys.readouterr().out.splitlines()]
    for n in ("jordan2x2", "gap2x2", "cubic_i", "harmonic_quartic", "double_well", "poly_lq"):
        assert n in names


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "ptspectra.cli", "catalog", "--list"], capture_output=True, text=True)
    assert r.returncode == 0 and "jordan2x2" in r.stdout


@pytest.fixture
def sign_error(monkeypatch):
    def broken(H, P):
        # P conj(H) P + H instead of minus
        H = np.asarray(H)
        return float(np.linalg.norm(P @ H.conj() @ P + H) / np.linalg.norm(H))
    monkeypatch.setattr(ptspectra.discretize, "pt_residual", broken)


def test_fault_injection_breaks_reality_persistence(sign_error):
    assert not verification.run_criterion(11).passed


def test_fault_injection_breaks_numerical_range(sign_error):
    passed, measured, _ = verification.c10_numerical_range(n_matrices=3)
    assert not passed and measured["pt_residual"] > 1


def test_fault_injection_visible_in_audit(sign_error, tmp_path):
    cfg = {"task": "audit", "family": "cubic_i", "discretization": {"type": "basis", "n_modes": 30}}
    assert cli.run(cfg, tmp_path)["outputs"]["pt_residual"] > 1
