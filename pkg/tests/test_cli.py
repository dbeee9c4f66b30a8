import json
import math
import re
import subprocess
import sys

import numpy as np
import pytest

from fmt_uncertainty import GaussianChirp, Grid, SampledSignal, fmt_apply, normalize, plan_fmt, sample_gaussian_chirp
from fmt_uncertainty.cli import main
from fmt_uncertainty.symplectic import matrix_from_spec


def _numbers(text: str) -> list:
    return [float(t) for t in re.findall(r"-?\d+\.\d+(?:e[-+]\d+)?", text)]


@pytest.fixture
def signal_file(tmp_path):
    f = normalize(sample_gaussian_chirp(GaussianChirp((0.5,), 3.0), Grid.box(128, 5.0)))
    path = tmp_path / "sig.json"
    path.write_text(json.dumps(f.to_dict()))
    return path, f


def _config(tmp_path, **extra):
    cfg = {
        "schema_version": 1,
        "signals": [{"zeta": [1.0, 2.0], "epsilon": 1.0}, {"zeta": [0.5, 0.5], "epsilon": None}],
        "pairs": [{"name": "shears", "m1": "fresnel:-1", "m2": "fresnel:1"},
                  {"m1": "fourier", "m2": "frft:0.5"}],
        "p_values": [1, 2],
    }
    cfg.update(extra)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    return path


@pytest.mark.parametrize("name", ["example", "paper-example"])
def test_example_command(name, capsys):
    assert main([name]) == 0
    out = capsys.readouterr().out
    assert "product" in out and "component" in out and "trace" in out


def test_example_ignores_constant_phase(capsys):
    outputs = []
    for beta in (0.0, 1.0, math.pi):
        assert main(["example", "--beta", str(beta)]) == 0
        outputs.append(_numbers(capsys.readouterr().out))
    for other in outputs[1:]:
        assert np.allclose(other, outputs[0], rtol=1e-12, atol=0)


def test_transform_command(tmp_path, signal_file, capsys):
    path, f = signal_file
    out = tmp_path / "out" / "lf.json"
    assert main(["transform", "--in", str(path), "--matrix", "frft:0.7", "--out", str(out), "--roundtrip"]) == 0
    text = capsys.readouterr().out
    vals = dict(line.split("=", 1) for line in text.split() if "=" in line)
    assert float(vals["unitarity_residual"]) <= 1e-6
    assert float(vals["roundtrip_residual"]) <= 1e-4
    lf = SampledSignal.from_dict(json.loads(out.read_text()))
    ref = fmt_apply(plan_fmt(matrix_from_spec("frft:0.7", 1), f.grid), f)
    assert lf.grid.same_as(ref.grid)
    assert np.allclose(lf.values, ref.values, rtol=0, atol=1e-15)
    assert not [p for p in out.parent.iterdir() if p.name.endswith(".tmp")]


def test_transform_rejects_non_free_matrix(tmp_path, signal_file, capsys):
    path, _ = signal_file
    mat = tmp_path / "m.json"
    mat.write_text(json.dumps({"blocks": {"A": [[1.0]], "B": [[0.0]], "C": [[0.5]], "D": [[1.0]]}}))
    assert main(["transform", "--in", str(path), "--matrix", str(mat), "--out", str(tmp_path / "x.json")]) == 1
    assert "SingularB" in capsys.readouterr().err
    assert not (tmp_path / "x.json").exists()


def test_transform_reports_unreadable_signal(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["transform", "--in", str(bad), "--matrix", "fourier", "--out", str(tmp_path / "o.json")]) == 1
    assert "SignalLoadError" in capsys.readouterr().err


def test_verify_small_config(tmp_path, capsys):
    cfg = _config(tmp_path)
    out = tmp_path / "report.json"
    assert main(["verify", "--config", str(cfg), "--out", str(out)]) == 0
    assert "violations=0" in capsys.readouterr().out
    report = json.loads(out.read_text())
    assert report["summary"]["cells"] == 4 and report["summary"]["passed"]
    first = out.read_bytes()
    assert main(["verify", "--config", str(cfg), "--out", str(out)]) == 0
    assert out.read_bytes() == first


def test_verify_csv_output(tmp_path):
    out = tmp_path / "report.csv"
    assert main(["verify", "--config", str(_config(tmp_path)), "--out", str(out), "--format", "csv"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "signal_id,m1_id,m2_id,bound_name,lhs,rhs,slack,pass"
    assert all(line.endswith(",true") for line in lines[1:])


def test_verify_fixed_grid_and_signal_file(tmp_path, capsys):
    f = normalize(sample_gaussian_chirp(GaussianChirp((0.5, 1.0), 4.0), Grid.box([128, 128], [4.0, 6.0])))
    sig = tmp_path / "s.json"
    sig.write_text(json.dumps(f.to_dict()))
    cfg = _config(tmp_path, signals=[{"file": str(sig)}],
                  pairs=[{"m1": "fourier", "m2": "frft:1.0"}])
    assert main(["verify", "--config", str(cfg)]) == 0
    assert "cells=1" in capsys.readouterr().out


def test_verify_names_corrupt_matrix(tmp_path, capsys):
    corrupt = {"blocks": {"A": [[2.0, 0], [0, 1]], "B": [[1, 0], [0, 1]], "C": [[0, 0], [0, 0]],
                          "D": [[1, 0], [0, 1]]}, "name": "corrupt"}
    cfg = _config(tmp_path, pairs=[{"m1": corrupt, "m2": "fourier"}])
    assert main(["verify", "--config", str(cfg)]) == 1
    err = capsys.readouterr().err
    assert "NotSymplectic" in err and "corrupt" in err


@pytest.mark.parametrize("extra,needle", [
    ({"colour": "red"}, "unknown config keys"),
    ({"schema_version": 2}, "schema_version"),
    ({"p_values": [3]}, "p_values"),
    ({"bounds": ["nope"]}, "unknown bounds"),
])
def test_verify_config_errors(tmp_path, capsys, extra, needle):
    assert main(["verify", "--config", str(_config(tmp_path, **extra))]) == 1
    err = capsys.readouterr().err
    assert "ConfigError" in err and needle in err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "fmt_uncertainty", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "fmt-uncertainty" in res.stdout
