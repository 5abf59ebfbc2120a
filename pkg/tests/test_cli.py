import json
import subprocess
import sys

import pytest

from qtm import machines as M
from qtm.cli import CLI_SCHEMA, parse_state, run_command


def run(capsys, *argv):
    code = run_command(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--json")
    doc = json.loads(out)
    assert doc["schema"] == CLI_SCHEMA and doc["command"] == argv[0]
    return code, doc


# ------------------------------------------------------------- validate

def test_validate_free(capsys):
    code, out, _ = run(capsys, "validate", "--machine", "builtin:free")
    assert code == 0 and "DPG in computation basis: true" in out


def test_validate_erasure_json(capsys):
    code, doc = run_json(capsys, "validate", "--machine", "builtin:erasure")
    assert code == 0 and doc["ok"]
    dpg = doc["dpg_computation_basis"]
    assert dpg["decision"] is False and dpg["witness"]["kind"] == "row"


def test_validate_machine_file(capsys, tmp_path):
    p = tmp_path / "m.json"
    M.save_machine(M.interf1(), p)
    code, doc = run_json(capsys, "validate", "--machine", str(p))
    assert code == 0 and doc["machine"] == "interf1"


# ----------------------------------------------------------------- path

def test_path_broken_interferometer_fails(capsys):
    code, out, _ = run(capsys, "path", "--machine", "builtin:interf2_broken", "--state", "interf2single:j=1",
                       "--steps", "12")
    assert code == 1 and "witness:" in out and "FAIL" in out


def test_path_broken_interferometer_json_witness(capsys):
    code, doc = run_json(capsys, "path", "--machine", "builtin:interf2_broken", "--state", "interf2single:j=2",
                         "--steps", "12")
    assert code == 1 and not doc["ok"] and doc["witness"] is not None


def test_path_broken_interferometer_two_ones_seed(capsys):
    # the 1,0,1 seed keeps the broken arms in step; only single-1 seeds expose the defect
    code, _, _ = run(capsys, "path", "--machine", "builtin:interf2_broken", "--state", "interf2seed",
                     "--steps", "12")
    assert code == 0


def test_path_erasure(capsys):
    code, doc = run_json(capsys, "path", "--machine", "builtin:erasure", "--state", "erasure:n=0,b=5",
                         "--steps", "20", "--back-steps", "3")
    assert code == 0
    assert doc["path"]["classification"] == "left_truncated"
    assert doc["shift_type"] == "coisometry (truncated)"


def test_path_cycle(capsys):
    code, doc = run_json(capsys, "path", "--machine", "builtin:cycle", "--state", "basis:l=0,j=0",
                         "--steps", "9")
    assert code == 0 and doc["path"]["cyclic"] == 3


# ------------------------------------------------------------- spectrum

def test_spectrum_finite_erasure(capsys):
    code, doc = run_json(capsys, "spectrum", "--machine", "builtin:erasure", "--state", "erasure:n=0,b=1,a=-1",
                         "--steps", "10", "--back-steps", "10")
    assert code == 0 and doc["n"] == 3
    assert doc["eigenvalues"] == pytest.approx([2 - 2 ** 0.5, 2, 2 + 2 ** 0.5], abs=1e-12)
    verdicts = {f["name"]: f["agrees"] for f in doc["formulas"]}
    assert verdicts == {"wall_quantization": False, "standing_wave": True}


def test_spectrum_text_flags_disagreement(capsys):
    code, out, _ = run(capsys, "spectrum", "--machine", "builtin:cycle", "--state", "basis:l=1,j=2")
    assert code == 0 and "cyclic" in out and "agrees" in out


def test_spectrum_refuses_unverified_path(capsys):
    code, out, _ = run(capsys, "spectrum", "--machine", "builtin:interf2_broken", "--state", "interf2single:j=1",
                       "--steps", "12")
    assert code == 1 and "no spectrum" in out


# --------------------------------------------------------------- evolve

def test_evolve_methods_agree(capsys):
    args = ("evolve", "--machine", "builtin:free", "--state", "basis:l=0,j=0", "--K", "1", "--time", "0.5")
    _, a = run_json(capsys, *args, "--method", "expm")
    _, b = run_json(capsys, *args, "--method", "pathsum", "--n-max", "30")
    amp = lambda doc: {c["head_pos"]: complex(*c["amp"]) for c in doc["amplitudes"]}
    ea, eb = amp(a), amp(b)
    assert max(abs(ea[j] - eb.get(j, 0)) for j in ea) < 1e-8
    assert abs(a["norm"] - 1) < 1e-10


def test_evolve_reports_leak(capsys):
    code, doc = run_json(capsys, "evolve", "--machine", "builtin:free", "--state", "basis:l=0,j=0",
                         "--time", "3", "--window", "3")
    assert code == 0 and doc["warnings"]


# ------------------------------------------------------------------ graph

def test_graph_add1_dot(capsys):
    code, out, err = run(capsys, "graph", "--machine", "builtin:add1", "--state", "markers:0,4", "--steps", "13",
                         "--format", "dot")
    assert code == 0 and out.startswith("digraph qtm {")
    assert out.count("peripheries=2") == 8 and "8 leaves" in err


def test_graph_json_structure(capsys):
    code, doc = run_json(capsys, "graph", "--machine", "builtin:interf2", "--state", "interf2chain:n=3",
                         "--steps", "20")
    loops = [lp for lp in doc["structure"]["loops"] if lp["top_level"]]
    assert code == 0 and len(loops) == 3


def test_graph_out_file(capsys, tmp_path):
    p = tmp_path / "g.json"
    code, _, _ = run(capsys, "graph", "--machine", "builtin:interf1", "--state", "interf1:z=2", "--steps", "10",
                     "--format", "json", "--out", str(p))
    doc = json.loads(p.read_text())
    assert code == 0 and doc["schema"] == "qtm.graph/1"


def test_outputs_deterministic(capsys):
    args = ("graph", "--machine", "builtin:add1", "--state", "markers:0,3", "--steps", "10", "--format", "json")
    first = run(capsys, *args)[1]
    assert all(run(capsys, *args)[1] == first for _ in range(2))


# --------------------------------------------------------------- isometry

def test_isometry_erasure(capsys):
    code, doc = run_json(capsys, "isometry", "--machine", "builtin:erasure", "--n-max", "3", "--sample", "10")
    assert code == 0 and doc["max_idempotency_defect"] < 1e-10


def test_isometry_window_overflow_is_usage_error(capsys):
    code, _, err = run(capsys, "isometry", "--machine", "builtin:free", "--n-max", "5", "--window", "2")
    assert code == 2 and "larger window" in err


# ----------------------------------------------------------------- errors

@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    ["validate", "--machine", "builtin:nope"],
    ["path", "--machine", "builtin:free", "--state", "markers:x"],
    ["path", "--machine", "builtin:free", "--state", "wat:1"],
    ["path", "--machine", "builtin:free", "--steps", "-3", "--state", "basis:l=0,j=0"],
    ["path", "--machine", "builtin:free", "--state", "markers:0,4"],
    ["validate", "--machine", "/no/such/file.json"],
    ["evolve", "--machine", "builtin:free", "--state", "basis:l=0,j=0", "--method", "magic"],
])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and err


def test_state_file_source(tmp_path):
    p = tmp_path / "s.json"
    M.save_state(M.interf2_seed(), p)
    psi = parse_state(str(p), M.interf2())
    assert psi.support() == M.interf2_seed().support()


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qtm.cli", "validate", "--machine", "builtin:cycle", "--json"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["dpg_computation_basis"]["decision"] is True
