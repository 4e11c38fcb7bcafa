import io
import json
import os
import subprocess
import sys

import pydot
import pytest

from taucover.cli import main
from conftest import data_file


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out)
    lines = out.getvalue().splitlines()
    return code, lines[:-1], json.loads(lines[-1])


def test_algebra_check():
    code, text, record = run("algebra", "check", data_file("example.quiver"))
    assert code == 0
    assert text == ["admissible, dim 11, pi1 free rank 2"]
    assert record["dim"] == 11 and record["rank"] == 2


def test_module_tau(tmp_path):
    path = tmp_path / "s1.mod"
    path.write_text("dim 1 1\n")
    code, text, record = run("module", "tau", data_file("a2.quiver"), str(path))
    assert code == 0 and record["tau_dim_vector"] == [0, 1]


def test_tautilt_enumerate_with_dot(tmp_path):
    dot = tmp_path / "a2.dot"
    code, text, record = run("tautilt", "enumerate", data_file("a2.quiver"), "--dot", str(dot))
    assert code == 0 and text[-1] == "5 pairs, pentagon"
    graph = pydot.graph_from_dot_data(dot.read_text())[0]
    assert len(graph.get_edges()) == 5


def test_budget_exit_code():
    code, _, record = run("tautilt", "enumerate", data_file("kronecker.quiver"), "--budget", "5")
    assert code == 4 and record["status"] == "unknown-exceeded"


def test_cover_commands(tmp_path):
    quiver, grading = data_file("dual.quiver"), data_file("dual_line.grading")
    code, text, record = run("cover", "window", quiver, grading, "--radius", "3")
    assert code == 0 and record["covering_ok"] and len(record["vertices"]) == 7
    module = tmp_path / "line.mod"
    module.write_text("dim v_0 1\ndim v_1 1\nmap x_0 1\n")
    code, _, record = run("cover", "pushdown", quiver, grading, str(module))
    assert code == 0 and record["dim_vector"] == [2]
    code, _, record = run("cover", "mutate-orbit", quiver, grading, "--positions", "0")
    assert code == 0 and record["pushdown"] == "0 | {v}"
    code, _, record = run("cover", "verify-commute", quiver, grading, "--depth", "2")
    assert code == 0 and record["status"] == "ok"


def test_lift_string():
    code, _, record = run("cover", "lift-string", data_file("example.quiver"), data_file("example_z.grading"),
                          "--walk", "c^-1 e a d^-1 b", "--center", "2")
    assert code == 0 and record["pushdown_iso"] == "yes"
    assert record["vertices"] == ["2_0", "3_0", "1_0", "2_0", "4_1", "3_1"]


def test_worked_example_summary():
    code, text, record = run("paper-example")
    assert code == 0 and record["status"] == "ok"
    assert text[-1] == "OK: F1 push-down of M(u1) = M(u); F2 push-down of M(u2) = M(u); lift via F2 domain OK"


@pytest.mark.parametrize("content, expected", [("vertex 1\narrow a 1\n", 2), ("vertex 1\narrow a 1 1\n", 3)])
def test_error_categories(tmp_path, content, expected):
    path = tmp_path / "bad.quiver"
    path.write_text(content)
    code, _, record = run("algebra", "check", str(path))
    assert code == expected and record["status"] == "error"
    assert record["category"] == {2: "parse", 3: "precondition"}[expected]


def test_missing_file():
    code, _, record = run("algebra", "check", "/nonexistent/file.quiver")
    assert code == 2 and record["category"] == "io"


def test_reports_are_byte_identical_across_hash_seeds():
    argv = [sys.executable, "-m", "taucover", "--seed", "3", "cover", "verify-commute",
            data_file("example.quiver"), data_file("example_z.grading"), "--depth", "1", "--center", "2"]
    outputs = set()
    for hash_seed in ("0", "1", "12345"):
        env = dict(os.environ, PYTHONHASHSEED=hash_seed)
        proc = subprocess.run(argv, capture_output=True, env=env, check=True)
        outputs.add(proc.stdout)
    assert len(outputs) == 1
