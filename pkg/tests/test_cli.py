import json
import subprocess
import sys

import pytest

from ionlaser import phase_map
from ionlaser.cli import main
from ionlaser.errors import ConvergenceError
from ionlaser.output import read_table, sha256

SMALL = ["--cutoff", "12"]


def run(tmp_path, name, *argv):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def header(path):
    return path.read_text().splitlines()[0]


def test_steady_outputs(tmp_path):
    code, out = run(tmp_path, "s", "steady", *SMALL)
    assert code == 0
    assert header(out / "pn.csv") == "n,probability"
    rows = read_table(out / "pn.csv")
    assert len(rows) == 12 and abs(sum(float(r["probability"]) for r in rows) - 1) < 1e-12
    moments = json.loads((out / "moments.json").read_text())
    assert moments["g2_zero"]["normally_ordered"] > 1
    assert set(moments["g2_zero"]) >= {"literal", "normally_ordered"}
    m = manifest(out)
    assert m["command"] == "steady" and m["schema_version"] == 1
    for name, digest in m["files"].items():
        assert sha256(out / name) == digest


@pytest.mark.filterwarnings("ignore::ionlaser.errors.AliasingWarning")
def test_golden_headers(tmp_path):
    cases = {
        ("wigner", "--points", "5"): ("wigner.csv", "x,p,value"),
        ("charfunc", "--points", "5"): ("chi.csv", "re_alpha,im_alpha,re_chi,im_chi"),
        ("g2", "--tau-max", "1", "--tau-points", "3"): ("g2.csv", "tau,g2"),
        ("evolve", "--t-max", "1", "--steps", "3"): (
            "trajectory.csv", "t,mean_n,pop_g,pop_e1,pop_e2,trace_defect"),
        ("tomography", "--points", "5"): ("wigner_reconstructed.csv", "x,p,value"),
    }
    for i, (argv, (fname, expected)) in enumerate(cases.items()):
        code, out = run(tmp_path, f"g{i}", *argv, *SMALL)
        assert code == 0, argv
        assert header(out / fname) == expected


def test_wigner_grid_is_long_format_x_major(tmp_path):
    code, out = run(tmp_path, "w", "wigner", *SMALL, "--points", "3", "--extent", "1", "--matrix")
    assert code == 0
    rows = read_table(out / "wigner.csv")
    assert [(r["x"], r["p"]) for r in rows[:3]] == [("-1.0", "-1.0"), ("-1.0", "0.0"), ("-1.0", "1.0")]
    assert len((out / "wigner_matrix.csv").read_text().splitlines()) == 3
    sidecar = json.loads((out / "wigner.json").read_text())
    assert "ring" in sidecar


def test_single_point_chi_grid(tmp_path):
    code, out = run(tmp_path, "c", "charfunc", *SMALL, "--points", "1")
    assert code == 0
    assert (out / "chi.csv").read_text().splitlines()[1] == "0.0,0.0,1.0,0.0"


def test_json_format(tmp_path):
    code, out = run(tmp_path, "j", "steady", *SMALL, "--format", "json")
    assert code == 0
    data = json.loads((out / "pn.json").read_text())
    assert data["columns"] == ["n", "probability"] and len(data["rows"]) == 12


@pytest.mark.filterwarnings("ignore::ionlaser.errors.AliasingWarning")
def test_outputs_are_deterministic(tmp_path):
    argv = ["tomography", *SMALL, "--points", "7", "--shots", "200", "--seed", "3"]
    _, a = run(tmp_path, "a", *argv)
    _, b = run(tmp_path, "b", *argv)
    ma, mb = manifest(a), manifest(b)
    assert ma["files"] == mb["files"]
    assert ma["config_digest"] == mb["config_digest"]
    for name in ma["files"]:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert b"\r\n" not in (a / "chi_measured.csv").read_bytes()


@pytest.mark.parametrize("argv,code", [
    (["steady", "--g-h", "-1"], 2),
    (["steady", "--cutoff", "1"], 2),
    (["steady", "--gamma-c", "0"], 2),
    (["wigner", "--points", "0"], 2),
    (["phase", "--g-h-points", "2"], 2),
    (["steady", "--g-h", "0", "--g-c", "0", "--cutoff", "4"], 4),
    (["g2", "--g-h", "0", "--cutoff", "6"], 5),
    (["steady", "--bogus"], 2),
])
def test_exit_codes(tmp_path, argv, code):
    assert run(tmp_path, "e", *argv)[0] == code


def test_all_cells_failed_exit(tmp_path, monkeypatch):
    def fail(*_args, **_kw):
        raise ConvergenceError("forced", 1.0)

    monkeypatch.setattr(phase_map, "steady_state", fail)
    code, out = run(tmp_path, "p", *PHASE)
    assert code == 6
    rows = read_table(out / "points.csv")
    assert all(r["region"] == "C" and r["error"].startswith("ConvergenceError") for r in rows)


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"g-h": 0.5, "cutoff": 10, "g_c": 1.5}))
    code, out = run(tmp_path, "c1", "steady", "--config", str(cfg), "--g-h", "0.2")
    assert code == 0
    c = manifest(out)["config"]
    assert c["g_h"] == 0.2 and c["cutoff"] == 10 and c["g_c"] == 1.5


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"g_hh": 0.5}))
    assert run(tmp_path, "c2", "steady", "--config", str(cfg))[0] == 2
    cfg.write_text("not json")
    assert run(tmp_path, "c3", "steady", "--config", str(cfg))[0] == 2


def test_manifest_replay(tmp_path):
    code, out = run(tmp_path, "r1", "wigner", *SMALL, "--points", "5", "--g-h", "0.4")
    assert code == 0
    code, again = run(tmp_path, "r2", "wigner", "--config", str(out / "manifest.json"))
    assert code == 0
    assert manifest(out)["files"] == manifest(again)["files"]


PHASE = ["phase", "--g-h-min", "0.05", "--g-h-max", "3", "--g-h-points", "5",
         "--g-c-min", "0.5", "--g-c-max", "2", "--g-c-points", "3", "--cutoff", "10"]


def test_phase_outputs_and_resume(tmp_path, monkeypatch):
    code, out = run(tmp_path, "ph", *PHASE)
    assert code == 0
    assert header(out / "points.csv") == (
        "g_h,g_c,mean_n,g2_zero,g2_zero_literal,converged,leak,region,residual,error")
    assert header(out / "l1.csv") == "g_c,g_h_star"
    assert header(out / "l2.csv") == "g_c,g_h_boundary"
    rows = read_table(out / "points.csv")
    assert len(rows) == 15 and {r["region"] for r in rows} <= {"A", "B", "C"}
    first = (out / "points.csv").read_bytes()

    # drop the last four solved cells and tear the final line, then resume
    ckpt = out / "cells.jsonl"
    lines = ckpt.read_text().splitlines(keepends=True)
    ckpt.write_text("".join(lines[:-4]) + lines[-4][:10])
    solved = []
    original = phase_map.solve_point

    def counting(params, *rest):
        solved.append((params.g_h, params.g_c))
        return original(params, *rest)

    monkeypatch.setattr(phase_map, "solve_point", counting)
    code, out2 = run(tmp_path, "ph", *PHASE)
    assert len(solved) == 4
    assert code == 0
    assert (out2 / "points.csv").read_bytes() == first
    lines = ckpt.read_text().splitlines()
    assert len(lines) == 16
    assert all(json.loads(line) for line in lines)


def test_phase_config_change_invalidates_checkpoint(tmp_path):
    _, out = run(tmp_path, "pc", *PHASE)
    before = json.loads((out / "cells.jsonl").read_text().splitlines()[0])["config_digest"]
    code, out = run(tmp_path, "pc", *PHASE[:-1], "9")
    assert code == 0
    lines = (out / "cells.jsonl").read_text().splitlines()
    assert json.loads(lines[0])["config_digest"] != before
    assert len(lines) == 16


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ionlaser", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "0.1.0" in proc.stdout


def test_phase_threads_do_not_change_results(tmp_path):
    _, a = run(tmp_path, "t1", *PHASE)
    _, b = run(tmp_path, "t2", *PHASE, "--threads", "3")
    for name in ("points.csv", "l1.csv", "l2.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
