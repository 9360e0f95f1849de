import json
import subprocess
import sys

import pytest

from polymin.cli import (
    EXIT_INPUT,
    EXIT_MISMATCH,
    EXIT_OK,
    EXIT_TMAX,
    ProblemError,
    parse_problem,
    run,
)

from conftest import CUBIC, LEEP_STARR, MOTZKIN, ROBINSON


@pytest.fixture
def motzkin_file(tmp_path):
    p = tmp_path / "motzkin.prob"
    p.write_text(f"# Motzkin\nvars: x, y\nminimize: {MOTZKIN}\noption t_max = 8\n")
    return p


@pytest.fixture
def cubic_file(tmp_path):
    p = tmp_path / "cubic.prob"
    p.write_text(f"vars: x, y\nminimize: {CUBIC}\n")
    return p


def test_parse_problem():
    pf = parse_problem("vars: a, b\n\nminimize: a^2 + b^2  # comment\noption seed = 4\n")
    assert pf.variables == ["a", "b"]
    assert pf.objective_text == "a^2 + b^2"
    assert pf.options == {"seed": 4}


@pytest.mark.parametrize("text, line, msg", [
    ("minimize: x\n", 1, "precede"),
    ("vars: x\nvars: y\n", 2, "duplicate 'vars:'"),
    ("vars:\n", 1, "no variables"),
    ("vars: x\nminimize: x +\n", 2, "objective"),
    ("vars: x\nminimize: y\n", 2, "objective"),
    ("vars: x\nminimize: x\nminimize: x\n", 3, "duplicate 'minimize:'"),
    ("vars: x\nminimize: x\noption bogus = 1\n", 3, "unknown option"),
    ("vars: x\nminimize: x\noption t_max = many\n", 3, "bad value"),
    ("vars: x\nminimize: x\noption t_max\n", 3, "expected"),
    ("vars: x\nmaximise: x\n", 2, "unrecognised"),
    ("vars: x\n", 0, "missing 'minimize:'"),
    ("", 0, "missing 'vars:'"),
])
def test_problem_errors(text, line, msg):
    with pytest.raises(ProblemError, match=msg) as exc:
        parse_problem(text, "p.prob")
    assert exc.value.line == line


def test_minimize_json(motzkin_file, tmp_path, capsys):
    out = tmp_path / "res.json"
    assert run(["minimize", str(motzkin_file), "--json", "--out", str(out)]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc == json.loads(out.read_text())
    assert list(doc) == ["problem", "variables", "objective", "status", "minimum", "quotient_basis",
                         "border_basis", "points", "certificates", "flat_extension", "trace", "options"]
    assert doc["status"] == "ok"
    assert abs(doc["minimum"]) < 1e-6
    assert sorted(doc["quotient_basis"]) == sorted(["1", "x", "y", "x*y"])
    assert len(doc["points"]) == 4
    assert [r["hankel_size"] for r in doc["trace"] if r["stage"] == "relax"][:3] == [10, 15, 19]
    assert doc["options"]["t_max"] == 8


def test_human_output(cubic_file, capsys):
    assert run(["minimize", str(cubic_file)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "minimum: -18.61818" in out
    assert "quotient basis: {1}" in out
    assert "trace:" in out


def test_deterministic_output(motzkin_file, tmp_path):
    docs = []
    for k in range(2):
        out = tmp_path / f"r{k}.json"
        assert run(["minimize", str(motzkin_file), "--seed", "5", "--out", str(out)]) == EXIT_OK
        doc = json.loads(out.read_text())
        for r in doc["trace"]:
            r.pop("wall_ms")
        docs.append(json.dumps(doc, indent=2))
    assert docs[0] == docs[1]


def test_check_round_trip(motzkin_file, tmp_path, capsys):
    out = tmp_path / "res.json"
    assert run(["minimize", str(motzkin_file), "--out", str(out)]) == EXIT_OK
    assert run(["check", str(out)]) == EXIT_OK
    assert "4 points certified" in capsys.readouterr().out
    doc = json.loads(out.read_text())
    doc["points"][0] = [z + 0.1 for z in doc["points"][0]]
    out.write_text(json.dumps(doc))
    assert run(["check", str(out)]) == EXIT_MISMATCH
    assert "FAIL point 0" in capsys.readouterr().out


def test_check_relative_problem_path(motzkin_file, tmp_path, monkeypatch):
    out = tmp_path / "res.json"
    assert run(["minimize", str(motzkin_file), "--out", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    doc["problem"] = "motzkin.prob"
    out.write_text(json.dumps(doc))
    monkeypatch.chdir("/")
    assert run(["check", str(out)]) == EXIT_OK


def test_check_bad_documents(tmp_path):
    assert run(["check", str(tmp_path / "missing.json")]) == EXIT_INPUT
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["check", str(bad)]) == EXIT_INPUT
    bad.write_text("{}")
    assert run(["check", str(bad)]) == EXIT_INPUT


def test_missing_problem_file(tmp_path, capsys):
    assert run(["minimize", str(tmp_path / "nope.prob")]) == EXIT_INPUT
    assert "not found" in capsys.readouterr().err


def test_bad_problem_file(tmp_path, capsys):
    p = tmp_path / "bad.prob"
    p.write_text("vars: x\nminimize: x^^2\n")
    assert run(["minimize", str(p)]) == EXIT_INPUT
    assert "bad.prob:2" in capsys.readouterr().err


def test_t_max_exceeded(motzkin_file, capsys):
    assert run(["minimize", str(motzkin_file), "--t-max", "4", "--json"]) == EXIT_TMAX
    doc = json.loads(capsys.readouterr().out)
    assert doc["status"] == "t_max_exceeded"
    assert abs(doc["lower_bound"]) < 1e-6
    assert [r["t"] for r in doc["trace"]] == [3, 4]


def test_bound(motzkin_file, capsys):
    assert run(["bound", str(motzkin_file), "--degree", "4", "--json"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["hankel_size"] == 15 and not doc["gap_flag"]
    assert abs(doc["lower_bound"]) < 1e-6
    assert run(["bound", str(motzkin_file), "--degree", "2"]) == EXIT_INPUT


def test_dump_sdpa(cubic_file, tmp_path):
    d = tmp_path / "sdps"
    assert run(["minimize", str(cubic_file), "--dump-sdpa", str(d)]) == EXIT_OK
    names = sorted(p.name for p in d.iterdir())
    assert "t2_relax.dat-s" in names


def test_console_script(cubic_file):
    out = subprocess.run([sys.executable, "-m", "polymin.cli", "minimize", str(cubic_file), "--json"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert json.loads(out.stdout)["minimum"] == pytest.approx(-18.618181818, abs=1e-6)


# (t, gap flag, objective as printed) for the first relaxation at each degree,
# then the objective on the reduced basis
NARRATIVE = {
    "motzkin": (MOTZKIN, [(3, True, "-216"), (4, False, "0"), (5, False, "0")], "0"),
    "robinson": (ROBINSON, [(3, False, "-0.93"), (4, False, "0"), (5, False, "0"), (6, False, "0")], "0"),
    "cubic": (CUBIC, [(2, False, "-18.6"), (3, False, "-18.6")], "-18.6"),
    "leep_starr": (LEEP_STARR, [(3, True, "-5.4"), (4, False, "0.6")], "0.6"),
}


def _printed_match(value, text):
    decimals = len(text.split(".")[1]) if "." in text else 0
    return value is not None and abs(round(value, decimals) - float(text)) <= 1e-3


@pytest.mark.parametrize("name", list(NARRATIVE))
def test_trace_follows_worked_example(name, tmp_path, capsys):
    text, steps, final = NARRATIVE[name]
    p = tmp_path / f"{name}.prob"
    p.write_text(f"vars: x, y\nminimize: {text}\n")
    assert run(["minimize", str(p), "--json"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    relax = {r["t"]: r for r in doc["trace"] if r["stage"] == "relax"}
    mismatches = []
    for t, gap, obj in steps:
        if t not in relax:
            # the run certified the minimum before reaching this degree
            assert t > max(relax)
            continue
        r = relax[t]
        if r["gap_flag"] != gap or not _printed_match(r["objective"], obj):
            mismatches.append(f"t={t}: gap={r['gap_flag']} objective={r['objective']:.6g}, expected gap={gap} {obj}")
    reduced = doc["trace"][-1]
    assert reduced["stage"] == "reduced"
    if not _printed_match(reduced["objective"], final):
        mismatches.append(f"reduced objective {reduced['objective']:.6g}, expected {final}")
    assert not mismatches, "; ".join(mismatches)
