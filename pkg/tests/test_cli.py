import csv
import io
import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from macfb.bounds import d_lb
from macfb.channel import build_additive_mod_m
from macfb.cli import emit_csv, emit_json, main, parse_channel, round_sig
from macfb.reference import ternary_scheme


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def run_sub(argv, threads=None):
    env = dict(os.environ, SOURCE_DATE_EPOCH="1700000000")
    if threads is not None:
        env["MACFB_THREADS"] = str(threads)
    return subprocess.run([sys.executable, "-m", "macfb", *argv], capture_output=True, text=True, env=env)


@pytest.fixture
def channel_file(tmp_path):
    path = tmp_path / "ternary.json"
    path.write_text(json.dumps(build_additive_mod_m(3, 0.1).to_dict()))
    return str(path)


@pytest.fixture
def design_file(tmp_path):
    ch = build_additive_mod_m(3, 0.1)
    _, pz = d_lb(ch)
    path = tmp_path / "design.json"
    path.write_text(json.dumps({"user": 1, "x_phase2": [0, 1], "p_other": [1, 0, 0],
                                "pz": pz.ravel().tolist(), "n2": 1, "n3": 1, "lam": 0.0}))
    return str(path)


@pytest.fixture
def config_file(tmp_path):
    _, cfg = ternary_scheme()
    path = tmp_path / "scheme.json"
    path.write_text(json.dumps(cfg.to_dict()))
    return str(path)


# -- output formats ---------------------------------------------------------------------------

def test_round_sig_twelve_digits():
    assert round_sig(1 / 3) == 0.333333333333
    assert round_sig({"a": np.float64(2.0), "b": [np.int64(3), math.inf]}) == {"a": 2.0, "b": [3, math.inf]}


@given(st.recursive(st.floats(allow_nan=False, allow_infinity=False) | st.integers(-10 ** 6, 10 ** 6)
                    | st.booleans() | st.text(max_size=5),
                    lambda kids: st.lists(kids, max_size=4) | st.dictionaries(st.text(max_size=4), kids, max_size=4),
                    max_leaves=12))
def test_json_round_trip(obj):
    once = json.loads(emit_json(obj))
    assert once == round_sig(obj)
    assert json.loads(emit_json(once)) == once


def test_csv_manifest_and_union_header():
    text = emit_csv([{"a": 1, "b": 0.5}, {"a": 2, "c": "x"}], {"seed": 3})
    lines = text.splitlines()
    assert lines[0] == "# seed: 3"
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    assert rows[0]["b"] == "0.5" and rows[1]["c"] == "x"


# -- channel input ------------------------------------------------------------------------------

def test_shorthands():
    assert parse_channel("additive:m=3,p=0.1", {}) == build_additive_mod_m(3, 0.1)
    ch = parse_channel("product:bsc=0.1,bsc=0.2", {})
    assert ch.q.shape == (2, 2, 4)


def test_channel_file_digest(channel_file):
    digests = {}
    parse_channel(channel_file, digests)
    assert len(digests[channel_file]) == 64


# -- commands -------------------------------------------------------------------------------------

def test_dlb_value(channel_file, capsys):
    code, out, _ = run(["dlb", "--channel", channel_file], capsys)
    assert code == 0
    res = json.loads(out)["result"]
    assert res["value"] == pytest.approx(2.1, rel=1e-6)
    assert "pz" in res


def test_bounds_parallel(capsys):
    code, out, _ = run(["bounds", "--channel", "product:bsc=0.1,bsc=0.2", "--r1", "0.4248",
                        "--r2", "0.0556"], capsys)
    assert code == 0
    res = json.loads(out)["result"]
    assert res["lb_three_phase"] == pytest.approx(0.50718, abs=0.02)
    assert res["ub_three_phase"] == pytest.approx(0.50718, abs=0.02)
    assert res["lb_two_phase"] <= res["lb_three_phase"]


def test_region_csv(capsys):
    code, out, _ = run(["region", "--channel", "additive:m=3,p=0.1", "--points", "5"], capsys)
    assert code == 0
    body = [l for l in out.splitlines() if not l.startswith("#")]
    rows = list(csv.DictReader(io.StringIO("\n".join(body))))
    assert list(rows[0]) == ["theta", "radius", "r1", "r2"]
    assert len(rows) == 5


def test_confirm_exact_curve(channel_file, design_file, capsys):
    code, out, _ = run(["confirm", "--channel", channel_file, "--design", design_file,
                        "--n-sweep", "4:12:4", "--out", "json"], capsys)
    assert code == 0
    res = json.loads(out)["result"]
    assert "slope" in res and "kl_prediction" in res


def test_confirm_mc_requires_seed(channel_file, design_file, capsys):
    code, _, err = run(["confirm", "--channel", channel_file, "--design", design_file,
                        "--n-sweep", "4:12:4", "--mc"], capsys)
    assert code == 2 and "seed" in err


def test_drift_single_channel(capsys):
    code, out, _ = run(["drift", "--channel", "additive:m=3,p=0.1", "--codes", "random:3:1",
                        "--m1", "2", "--m2", "2", "--horizon", "3"], capsys)
    assert code == 0
    assert json.loads(out)["result"]


def test_drift_corpus_needs_seed(capsys):
    code, _, _ = run(["drift", "--channel", "corpus", "--count", "2"], capsys)
    assert code == 2


def test_example_table(capsys):
    code, out, _ = run(["example", "vlentropy"], capsys)
    assert code == 0
    assert out.count("PASS") == 3 and "FAIL" not in out


def test_example_ternary_json(capsys):
    code, out, _ = run(["example", "ternary", "--out", "json"], capsys)
    res = json.loads(out)["result"]
    assert code == 0 and res["passed"]


# -- exit codes -------------------------------------------------------------------------------------

def test_unknown_flag_exit_2():
    assert run_sub(["dlb", "--channel", "additive:m=3,p=0.1", "--bogus"]).returncode == 2


def test_missing_file_exit_3(tmp_path, capsys):
    code, _, err = run(["dlb", "--channel", str(tmp_path / "none.json")], capsys)
    assert code == 3


def test_bad_json_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"Q": [\n  [1, 2,\n}')
    code, _, err = run(["dlb", "--channel", str(path)], capsys)
    assert code == 3 and f"{path}:3:" in err


def test_non_stochastic_exit_3(tmp_path, capsys):
    path = tmp_path / "ns.json"
    path.write_text(json.dumps({"x1_size": 1, "x2_size": 1, "y_size": 2, "Q": [[[0.5, 0.4]]]}))
    assert run(["dlb", "--channel", str(path)], capsys)[0] == 3
    assert run(["dlb", "--channel", str(path), "--renormalize"], capsys)[0] == 0


def test_degenerate_design_exit_1(channel_file, tmp_path, capsys):
    path = tmp_path / "flat.json"
    path.write_text(json.dumps({"user": 1, "x_phase2": [0, 1], "p_other": [1 / 3] * 3,
                                "pz": None, "n2": 2, "n3": 0, "lam": 0.0}))
    code, _, _ = run(["confirm", "--channel", channel_file, "--design", str(path),
                      "--n-sweep", "4:8:2"], capsys)
    assert code == 1


def test_example_failure_exit_1(monkeypatch, capsys):
    from macfb import cli
    from macfb.reference import Check
    monkeypatch.setattr(cli, "example_checks", lambda name: [Check("x", 1.0, 2.0, 0.1)])
    assert run(["example", "ternary"], capsys)[0] == 1


# -- determinism -------------------------------------------------------------------------------------

def test_simulate_bit_identical_across_threads(config_file):
    argv = ["simulate", "--channel", "additive:m=3,p=0.1", "--config", config_file,
            "--trials", "20000", "--seed", "4"]
    a, b = run_sub(argv, threads=1), run_sub(argv, threads=4)
    assert a.returncode == b.returncode == 0
    ra, rb = json.loads(a.stdout), json.loads(b.stdout)
    assert ra["result"] == rb["result"]
    assert ra["manifest"]["timestamp"] == rb["manifest"]["timestamp"]
    c = run_sub(argv, threads=1)
    assert c.stdout == a.stdout
