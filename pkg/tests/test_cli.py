import json
import math
import re
import subprocess
import sys

import pytest

from qpcocycle import MultipleMinimaWarning
from qpcocycle.cli import main

FREE = """
[family]
potential = zero
energy = -3.0
[numerics]
grid = 64
edge_grid = 16
edge_tol = 1e-8
norm_steps = 200000
[sweep]
g0 = 1e-2
ratio = 2
count = 6
"""


def write_cfg(tmp_path, text=FREE, name="exp.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def kernel_calls(err):
    return int(re.findall(r"kernel_calls=(\d+)", err)[-1])


def test_le_free(tmp_path, capsys):
    code, out, _ = run(capsys, "le", "--config", write_cfg(tmp_path), "--out", str(tmp_path / "o"))
    data = json.loads(out)
    assert code == 0 and data["agree"]
    target = math.log((3 + math.sqrt(5)) / 2)
    assert data["bundle_integral"]["L"] == pytest.approx(target, abs=1e-12)
    assert data["norm_growth"]["L"] == pytest.approx(target, abs=1e-5)


def test_le_inside_spectrum(tmp_path, capsys):
    code, out, _ = run(capsys, "le", "--t", "0", "--config", write_cfg(tmp_path), "--out", str(tmp_path / "o"))
    data = json.loads(out)
    assert code == 2
    assert "error" in data["bundle_integral"]
    assert math.isfinite(data["norm_growth"]["L"])


def test_malformed_config(tmp_path, capsys):
    bad = write_cfg(tmp_path, "[numerics]\ngrid = lots\n", "bad.ini")
    code, _, err = run(capsys, "le", "--config", bad)
    assert code == 1 and "numerics.grid" in err
    code, _, err = run(capsys, "le", "--config", write_cfg(tmp_path, "[family]\nwobble = 1\n", "b2.ini"))
    assert code == 1 and "family.wobble" in err


def test_bad_jobs(tmp_path, capsys):
    code, _, err = run(capsys, "le", "--jobs", "-2", "--config", write_cfg(tmp_path))
    assert code == 1 and "--jobs" in err


def test_edge_free(tmp_path, capsys):
    out_dir = tmp_path / "o"
    code, out, _ = run(capsys, "edge", "--config", write_cfg(tmp_path), "--out", str(out_dir))
    assert code == 0
    info = json.loads(out)
    edge = json.loads(open(info["edge_json"]).read())
    assert abs(edge["t0"] + 2.0) <= 1e-8
    assert edge["certificates"][0]["is_uh"] and not edge["certificates"][1]["is_uh"]


def test_bundles_outputs(tmp_path, capsys):
    out_dir = tmp_path / "o"
    # the free family has a flat difference field, which is flagged
    with pytest.warns(MultipleMinimaWarning):
        code, out, _ = run(capsys, "bundles", "--t", "-2.5", "--config", write_cfg(tmp_path), "--out", str(out_dir))
    meta = json.loads(out)
    assert code == 0 and meta["grid"] == 64
    csv_files = list(out_dir.glob("*/bundles.csv"))
    assert len(csv_files) == 1
    lines = csv_files[0].read_text().splitlines()
    assert lines[0] == "theta,r_u,r_s,d" and len(lines) == 65
    for field in lines[1].split(","):
        assert f"{float(field):.17g}" == field


def test_sweep_cache_and_determinism(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    out_dir = tmp_path / "o"
    code, first, err1 = run(capsys, "sweep", "--jobs", "1", "--config", cfg, "--out", str(out_dir))
    assert code == 0 and kernel_calls(err1) > 0
    code, second, err2 = run(capsys, "sweep", "--jobs", "1", "--config", cfg, "--out", str(out_dir))
    assert code == 0 and kernel_calls(err2) == 0
    # cached and fresh results agree exactly
    assert json.loads(first) == json.loads(second)

    fresh_dir = tmp_path / "fresh"
    code, third, err3 = run(capsys, "sweep", "--no-cache", "--jobs", "2", "--config", cfg, "--out", str(fresh_dir))
    assert kernel_calls(err3) > 0
    a = next(out_dir.glob("*/sweep.csv")).read_bytes()
    b = next(fresh_dir.glob("*/sweep.csv")).read_bytes()
    assert a == b
    header = a.decode().splitlines()[0]
    assert header == "t,gap,d_min,theta_c,L,dLdt_lemma,dLdt_fd,err_L,err_dLdt,status"
    summary = json.loads(third)
    assert summary["n_failed"] == 0
    assert summary["d_min_fit"]["exponent"] == pytest.approx(0.5, abs=0.02)


def test_verify_constant_cocycle(tmp_path, capsys):
    code, out, _ = run(capsys, "verify", "--config", write_cfg(tmp_path), "--out", str(tmp_path / "o"))
    report = json.loads(out)
    assert code == 0
    assert "A2(a)" in [v["clause"] for v in report["violations"]]


def test_fit_from_csv(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    out_dir = tmp_path / "o"
    run(capsys, "sweep", "--jobs", "1", "--config", cfg, "--out", str(out_dir))
    csv_path = next(out_dir.glob("*/sweep.csv"))
    code, out, _ = run(capsys, "fit", "--input", str(csv_path), "--config", cfg, "--out", str(out_dir))
    summary = json.loads(out)
    assert code == 0 and summary["bound_ratio"] < 1.05


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "qpcocycle.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("le", "bundles", "edge", "sweep", "verify", "fit"):
        assert cmd in out.stdout
