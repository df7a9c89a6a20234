import json
import subprocess
import sys

import pytest

from rotstokes.cli import COMMANDS, SCHEMA_VERSION, load_params, main, render_csv, render_json

SMALL = {
    "osc-verify": "[osc-verify]\nm = 1.5, 2\nr = 0.5, 2\n",
    "osc-bound": "[osc-verify]\nsuite = bound\nm = 2\n",
    "kernel-verify": "[kernel-verify]\nn_trace = 50\nalpha = 0.1\nx_norms = 5\ny_fractions = 0, 0.45\n",
    "whole-plane": "[whole-plane]\nresidual = false\ndecay = false\n",
    "exterior-linear": "[exterior-linear]\nrefine = false\ngrid_file = true\n",
    "ns-solve": "[ns-solve]\nforcing = gaussian\nalpha = 0.1\ncontraction_pairs = 2\n",
    "hardy": "[hardy]\npanels_per_decade = 6\nn_gl = 8\n",
}


def _command(key):
    return "osc-verify" if key == "osc-bound" else key


def _run(tmp_path, key, text, *extra, sub="out"):
    cfg = tmp_path / f"{key}.ini"
    cfg.write_text(text)
    out = tmp_path / sub
    code = main([_command(key), "--config", str(cfg), "--out", str(out), *extra])
    return code, out


def _snapshot(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())} if out.exists() else {}


@pytest.mark.parametrize("key", sorted(SMALL))
def test_byte_reproducible(tmp_path, key):
    c1, o1 = _run(tmp_path, key, SMALL[key], "--seed", "7", sub="a")
    c2, o2 = _run(tmp_path, key, SMALL[key], "--seed", "7", sub="b")
    assert c1 == c2 == 0
    s1, s2 = _snapshot(o1), _snapshot(o2)
    assert s1 == s2 and s1
    doc = json.loads(s1[f"{_command(key)}.json"])
    assert doc["schema_version"] == SCHEMA_VERSION and doc["passed"] is True
    assert "runtime_seconds" not in doc
    for name in doc["tables"].values():
        assert name in s1


def test_threads_do_not_change_output(tmp_path):
    _, o1 = _run(tmp_path, "hardy", SMALL["hardy"], sub="a")
    _, o2 = _run(tmp_path, "hardy", SMALL["hardy"], "--threads", "3", sub="b")
    assert _snapshot(o1) == _snapshot(o2)


def test_seed_changes_randomised_sweep(tmp_path):
    _, o1 = _run(tmp_path, "kernel-verify", SMALL["kernel-verify"], "--seed", "1", sub="a")
    _, o2 = _run(tmp_path, "kernel-verify", SMALL["kernel-verify"], "--seed", "2", sub="b")
    assert _snapshot(o1)["kernel-verify.lemma32.csv"] != _snapshot(o2)["kernel-verify.lemma32.csv"]


def test_timings_opt_in(tmp_path):
    _, out = _run(tmp_path, "hardy", SMALL["hardy"], "--timings")
    assert "runtime_seconds" in json.loads((out / "hardy.json").read_text())


@pytest.mark.parametrize(
    "text",
    [
        "[hardy]\nn_gl = many\n",
        "[hardy]\nbogus = 1\n",
        "[nonsense]\nx = 1\n",
        "this is not ini\n",
        "[hardy]\nn_gl = 1\n",
    ],
)
def test_malformed_config_writes_nothing(tmp_path, text):
    code, out = _run(tmp_path, "hardy", text)
    assert code == 2
    assert not out.exists() or not any(out.iterdir())


def test_missing_config_file(tmp_path):
    assert main(["hardy", "--config", str(tmp_path / "nope.ini"), "--out", str(tmp_path / "o")]) == 2


@pytest.mark.parametrize("flag", [["--threads", "0"], ["--tolerance-scale", "0"], ["--seed", "-1"]])
def test_bad_flags(tmp_path, flag):
    assert main(["hardy", "--out", str(tmp_path / "o"), *flag]) == 2


def test_failed_assertion_still_reports(tmp_path):
    code, out = _run(tmp_path, "hardy", SMALL["hardy"] + "max_ratio = 0.01\n")
    assert code == 1
    doc = json.loads((out / "hardy.json").read_text())
    assert doc["passed"] is False and doc["assertions"]["ratio_bounded"]["passed"] is False


def test_numerical_failure_exit_code(tmp_path):
    code, out = _run(tmp_path, "ns-solve", "[ns-solve]\nforcing = gaussian\neps = 200\nalpha = 0.1\nmax_iter = 15\n")
    assert code == 3
    assert not out.exists() or not any(out.iterdir())


def test_precondition_exit_code(tmp_path):
    code, _ = _run(tmp_path, "ns-solve", "[ns-solve]\nforcing = gaussian\nalpha = 0.5\ncontraction_pairs = 1\n")
    assert code == 4


def test_io_failure_exit_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["hardy", "--out", str(blocker / "sub")]) == 5


def test_defaults_cover_every_command():
    for name in COMMANDS:
        assert load_params(name, None) == dict(COMMANDS[name].defaults)


def test_render_helpers():
    assert render_csv(["a", "b"], [[1, 0.1], [True, "x"]]) == "a,b\n1,0.10000000000000001\ntrue,x\n"
    with pytest.raises(ValueError):
        render_csv(["a"], [[1, 2]])
    assert render_json({"b": float("inf"), "a": (1, 2)}) == '{\n  "a": [\n    1,\n    2\n  ],\n  "b": "inf"\n}\n'


def test_console_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "rotstokes.cli", "osc-verify", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
        check=False,
    )
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "osc-verify.static.csv").read_text().count("\n") == 10
