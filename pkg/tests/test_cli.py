import csv
import io
import json
import re
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from telereset.cli import main

WORKED = ["--a-im", "0.7071067811865476", "--b-re", "0.5", "--b-im", "0.5"]
PLUS = ["--a-re", "0.7071067811865476", "--b-re", "0.7071067811865476"]


def schema(name):
    return json.loads(resources.files("telereset").joinpath(f"schemas/{name}.schema.json").read_text())


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    doc = json.loads(out)
    jsonschema.validate(doc, schema(argv[0]))
    return doc


def test_analyze_worked_example(capsys):
    d = run_json(capsys, "analyze", *WORKED)
    assert d["h_t"] == pytest.approx(1.25, abs=1e-12)
    assert d["one_bit_prob"] == pytest.approx(0.75, abs=1e-12)
    assert d["expected_attempts_given_reset_success"] == 2.0


def test_analyze_basis_state(capsys):
    d = run_json(capsys, "analyze", "--a-re", "1")
    assert d["h_t"] == 1.5 and all(e["p_success"] == 0 for e in d["reset_chain"])


def test_analyze_plus_three_resets(capsys):
    d = run_json(capsys, "analyze", *PLUS)
    assert d["p_need_k_resets"]["3"] == pytest.approx(0.125, abs=1e-12)


def test_analyze_polar_input(capsys):
    d = run_json(capsys, "analyze", "--theta", "1.5707963267948966", "--phase", "0")
    assert d["h_t"] == pytest.approx(1.25, abs=1e-12)


@pytest.mark.parametrize("argv", [
    ["analyze", "--a-re", "1", "--b-re", "0.1"],
    ["analyze", "--a-re", "1", "--theta", "0.3"],
    ["analyze"],
    ["simulate", "--a-re", "1", "--trials", "0"],
    ["simulate", "--a-re", "1", "--strategy", "sometimes"],
    ["simulate", "--a-re", "1", "--seed", "-4"],
    ["simulate", "--a-re", "1", "--max-resets", "2", "--amplitudes-unknown"],
    ["tree", "--a-re", "1", "--max-resets", "17"],
    ["tree", "--a-re", "1", "--format", "csv"],
    ["bias", "--a-re", "1", "--format", "dot"],
    ["nonsense"],
])
def test_usage_errors_exit_2(capsys, argv):
    try:
        code = main(argv)
    except SystemExit as exc:  # argparse-level errors
        code = exc.code
    assert code == 2


def test_norm_error_names_the_deviation(capsys):
    code, _, err = run(capsys, "analyze", "--a-re", "1", "--b-re", "0.1")
    assert code == 2 and "1.01" in err and "0.01" in err


def test_simulate_conventional(capsys):
    d = run_json(capsys, "simulate", *WORKED, "--strategy", "conventional", "--trials", "2000", "--seed", "3")
    assert d["mean_bits"] == 2.0 and sum(d["counts"].values()) == 2000


def test_simulate_prints_generated_seed(capsys):
    code, out, err = run(capsys, "simulate", *PLUS, "--trials", "100")
    seed = int(re.search(r"seed: (\d+)", err).group(1))
    again = run_json(capsys, "simulate", *PLUS, "--trials", "100", "--seed", str(seed))
    assert json.loads(out) == again


def test_simulate_csv(capsys):
    code, out, _ = run(capsys, "simulate", *PLUS, "--trials", "500", "--seed", "1", "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and rows[0] == ["statistic", "empirical", "n", "stderr"]


def test_out_path(tmp_path, capsys):
    target = tmp_path / "stats.json"
    code, out, _ = run(capsys, "simulate", *PLUS, "--trials", "200", "--seed", "1", "--out", str(target))
    assert code == 0 and out == ""
    jsonschema.validate(json.loads(target.read_text()), schema("simulate"))


def test_tree_leaves(capsys):
    d = run_json(capsys, "tree", *WORKED, "--max-resets", "0", "--strategy", "conventional")
    leaves = []

    def walk(n):
        if not n["children"]:
            leaves.append(n)
        for c in n["children"]:
            walk(c["node"])

    walk(d["tree"])
    assert len(leaves) == 4 and all(abs(l["probability"] - 0.25) < 1e-12 for l in leaves)
    d = run_json(capsys, "tree", *WORKED, "--max-resets", "1")
    assert abs(d["leaf_probability_sum"] - 1) < 1e-12
    assert d["credited_one_bit_mass"] == pytest.approx(0.75, abs=1e-12)


DOT_NODE = re.compile(r'^\s*(n\d+) \[label="[^"]*"(, color=\w+)?\];$')
DOT_EDGE = re.compile(r'^\s*(n\d+) -> (n\d+) \[label="[^"]*"\];$')


def parse_dot(text):
    """Small parser for the DOT subset the tool emits; raises on anything else."""
    lines = text.strip().splitlines()
    assert re.match(r"^digraph \w+ \{$", lines[0]) and lines[-1] == "}"
    nodes, edges = set(), []
    for line in lines[1:-1]:
        if line.strip() == "node [shape=box];":
            continue
        if m := DOT_NODE.match(line):
            nodes.add(m.group(1))
        elif m := DOT_EDGE.match(line):
            edges.append((m.group(1), m.group(2)))
        else:
            raise AssertionError(f"unparsable DOT line: {line!r}")
    assert all(a in nodes and b in nodes for a, b in edges)
    return nodes, edges


def test_tree_dot(capsys):
    code, out, _ = run(capsys, "tree", *WORKED, "--max-resets", "2", "--format", "dot")
    nodes, edges = parse_dot(out)
    assert code == 0 and len(edges) == len(nodes) - 1


def test_bias(capsys):
    d = run_json(capsys, "bias", "--a-re", "0.9486832980505138", "--b-re", "0.31622776601683794",
                 "--trials", "5000", "--seed", "2")
    assert d["post_selected_bob_p0"] == pytest.approx(0.9, abs=1e-12)
    assert d["unconditioned_bob_p0"] == pytest.approx(0.5, abs=1e-12)
    d = run_json(capsys, "bias", *PLUS, "--trials", "2000", "--seed", "2")
    assert d["post_selected_bob_p0"] == pytest.approx(0.5, abs=1e-12)
    assert d["unconditioned_bob_p0"] == pytest.approx(0.5, abs=1e-12)


def test_verify_default_passes(capsys):
    d = run_json(capsys, "verify", "--seed", "11", "--trials", "20000")
    assert d["passed"] and all(c["passed"] for c in d["cases"])


def test_verify_failure_path(capsys):
    code, out, err = run(capsys, "verify", "--seed", "11", "--trials", "2000", "--perturb-analytic", "0.2")
    assert code == 3 and "FAIL" in err
    jsonschema.validate(json.loads(out), schema("verify"))


def test_verify_csv(capsys):
    code, out, _ = run(capsys, "verify", "--seed", "5", "--trials", "3000", "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and rows[0] == ["statistic", "analytic", "empirical", "stderr", "z", "pass"]
    assert all(len(r) == 6 for r in rows)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "telereset", "analyze", *PLUS],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and json.loads(proc.stdout)["h_t"] == pytest.approx(1.25)


def test_transcript_schema():
    from telereset.protocol import ProtocolConfig, UnknownQubit, run_teleport
    t = run_teleport(UnknownQubit(0.6, 0.8j), ProtocolConfig(), [0.7, 0.2, 0.3, 0.1])
    jsonschema.validate(t.to_dict(), schema("transcript"))
