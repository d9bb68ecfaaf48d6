import json
from pathlib import Path

import numpy as np
import pytest

from bqp import reference_model
from bqp.cli import main
from bqp.errors import ParseError
from bqp.forest import read_forest_stream
from bqp.io import format_measure, format_model, load_models, parse_measure, parse_models, resolve_measure, resolve_model

DEMO_MODELS = Path(__file__).resolve().parents[1] / "demos" / "models.bqp"


def test_demo_file_matches_reference_models():
    models = load_models(DEMO_MODELS)
    assert sorted(models) == ["A", "B", "C"]
    for name, m in models.items():
        ref = reference_model(name)
        np.testing.assert_array_equal(m.Q, ref.Q)
        assert m.translation_invariant == ref.translation_invariant


def test_format_parse_round_trip():
    a = reference_model("A")
    back = parse_models(format_model(a))[a.name]
    np.testing.assert_array_equal(back.motion, a.motion)
    assert list(back.B) == list(a.B)


@pytest.mark.parametrize("text, lineno", [
    ("model X\nstates 0 1\nmotion\n 0 1 one\nend\n", 4),
    ("model X\nstates 0\nmotion\n 0 0 1\noffspring\n 0: 0 0.5 2\nend\n", 6),
    ("model X\nstates 0\nbogus\nend\n", 3),
    ("model X\nstates 0\nmotion\n 0 0 1\noffspring\n *: 1 1\n", 6),
])
def test_parse_errors_have_line_numbers(text, lineno):
    with pytest.raises(ParseError) as info:
        parse_models(text, "m.bqp")
    assert info.value.lineno == lineno
    assert str(info.value).startswith(f"m.bqp:{lineno}:")


def test_measures(tmp_path):
    a = reference_model("A")
    np.testing.assert_array_equal(resolve_measure(a, "green-row 1"), a.G[1])
    np.testing.assert_array_equal(resolve_measure(a, "green-row:2"), a.G[2])
    p = tmp_path / "nu.txt"
    p.write_text(format_measure(a, a.G[0]))
    np.testing.assert_array_equal(resolve_measure(a, str(p)), a.G[0])
    assert parse_measure(a, "2 1.5  # comment\n").tolist() == [0, 0, 1.5]
    with pytest.raises(ParseError):
        parse_measure(a, "9 1\n")


def test_resolve_model_file_and_name():
    assert resolve_model(f"{DEMO_MODELS}:C").name == "C"
    assert resolve_model(str(DEMO_MODELS)).name == "A"
    with pytest.raises(ParseError):
        resolve_model(f"{DEMO_MODELS}:Z")


def test_cli_inspect(capsys):
    assert main(["inspect", "--model", "A"]) == 0
    out = capsys.readouterr().out
    assert "bqp-report v1" in out and "C = 3.15359" in out
    assert "hit bounds at 2" in out


def test_cli_inspect_divergent(capsys):
    assert main(["inspect", "--model", "B"]) == 3
    assert "DivergentGreen" in capsys.readouterr().err


def test_cli_bad_file(tmp_path, capsys):
    bad = tmp_path / "bad.bqp"
    bad.write_text("model X\nstates 0\nmotion\n 0 0 x\nend\n")
    assert main(["inspect", "--model", str(bad)]) == 2
    assert "bad.bqp:4:" in capsys.readouterr().err


def test_cli_simulate_is_worker_independent(tmp_path):
    outs = []
    for w in (1, 2):
        p = tmp_path / f"s{w}.txt"
        assert main(["simulate", "biased", "--x", "2", "--n", "15000", "--seed", "3",
                     "--workers", str(w), "--out", str(p)]) == 0
        outs.append(p.read_text())
    assert outs[0] == outs[1]
    with open(tmp_path / "s1.txt") as fh:
        forests = read_forest_stream(fh, reference_model("A").states)
    assert len(forests) == 15000
    assert forests[0][0]["kind"] == "biased"


def test_cli_simulate_spine(capsys):
    assert main(["simulate", "spine", "--x", "2", "--n", "3", "--seed", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("# kind=spine") and lines[1] == "0 2" and lines[2] == "1 1"
    assert main(["simulate", "spine", "--n", "1"]) == 2


def test_cli_interlace(tmp_path, capsys):
    assert main(["interlace", "--nu", "green-row 0", "--u", "0", "--n", "5"]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0] == "state,empirical_occupation,exact_target,z_score"
    assert rows[1] == "0,0,0,0"
    out = tmp_path / "run"
    assert main(["interlace", "--nu", "green-row 0", "--u", "1", "--n", "50", "--seed", "4",
                 "--out", str(out)]) == 0
    assert (out / "occupation.csv").read_text().startswith("state,")
    assert "# replica=0" in (out / "interlacement.txt").read_text()
    assert main(["interlace", "--model", "B", "--nu", "green-row 0"]) == 3


def test_cli_verify_subset(tmp_path, capsys):
    assert main(["verify", "--criteria", "1,2,9", "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["passed"] and len(summary["reports"]) == 3
    assert (tmp_path / "summary.csv").read_text().startswith("name,statistic")
    assert main(["verify", "--criteria", "11"]) == 2


def test_cli_verify_corrupted_h_fails(capsys):
    assert main(["verify", "--criteria", "1", "--scale", "0.002", "--debug-corrupt-h", "1.2"]) == 1
    assert "FAIL spine identity with corrupted h" in capsys.readouterr().out


def test_cli_interlace_nested_sets(capsys):
    assert main(["interlace", "--nu", "green-row 1", "--u", "1", "--n", "1500", "--seed", "2",
                 "--Bprime", "0,2"]) == 0
    out = capsys.readouterr().out
    assert "PASS progeny occupation on B'" in out
    assert main(["interlace", "--nu", "green-row 1", "--B", "0,1", "--Bprime", "0"]) == 2
