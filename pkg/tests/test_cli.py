import hashlib
import json
import subprocess
import sys

import pytest

from shrinktarget.cli import EXIT_BUDGET, EXIT_OK, EXIT_PRECISION, EXIT_REPLAY, EXIT_SCHEMA, main
from shrinktarget.config import ConfigError, load_config

HIT = {"experiment": "hit", "seed": 3,
       "params": {"sequence": {"family": "geometric", "alpha": "2"}, "target": {"a": "3/10"},
                  "N": 2000, "seeds": 2}}
CORR = {"experiment": "corr", "seed": 1,
        "params": {"sequence": {"family": "geometric", "alpha": "2"}, "target": {"a": "3/10"},
                   "pairs": [[3, 10], [2, 7]]}}


def write(tmp_path, data, name="config.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def test_bad_target_exponent_is_a_schema_error(tmp_path, capsys):
    bad = json.loads(json.dumps(HIT))
    bad["params"]["target"]["a"] = 1.5
    assert main(["run", write(tmp_path, bad), "--out", str(tmp_path / "o")]) == EXIT_SCHEMA
    assert "target.a out of (0,1)" in capsys.readouterr().err


def test_unknown_field_rejected(tmp_path, capsys):
    bad = json.loads(json.dumps(HIT))
    bad["params"]["colour"] = "red"
    assert main(["run", write(tmp_path, bad), "--out", str(tmp_path / "o")]) == EXIT_SCHEMA
    assert "colour" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        load_config({**HIT, "extra_top": 1})


def test_unreadable_config(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert main(["run", str(p)]) == EXIT_SCHEMA


def test_run_writes_manifest_last(tmp_path):
    out = tmp_path / "o"
    assert main(["run", write(tmp_path, HIT), "--out", str(out)]) == EXIT_OK
    m = json.loads((out / "manifest.json").read_text())
    assert set(m["files"]) == {"hits.csv", "summary.json"}
    assert m["status"] == "ok" and m["config"]["seed"] == 3
    assert m["config"]["precision"]["guard_bits"] == 40
    for name, digest in m["files"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
    assert (out / "hits.csv").read_text().splitlines()[0] == "replica,y_seed,n,status"


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("SHRINKTARGET_OUTPUT", str(tmp_path / "env"))
    assert main(["run", write(tmp_path, HIT)]) == EXIT_OK
    assert (tmp_path / "env" / "hit-3" / "manifest.json").exists()


def test_replay_match_and_mismatch(tmp_path, capsys):
    out = tmp_path / "o"
    main(["run", write(tmp_path, HIT), "--out", str(out)])
    capsys.readouterr()
    assert main(["replay", str(out / "manifest.json")]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["status"] == "match"
    assert main(["replay", str(out / "manifest.json"), "--seed", "5"]) == EXIT_REPLAY
    res = json.loads(capsys.readouterr().out)
    assert res["status"] == "mismatch" and "hits.csv" in res["differing"]


def test_replay_with_more_precision_is_tolerant(tmp_path, capsys):
    out = tmp_path / "o"
    main(["run", write(tmp_path, CORR), "--out", str(out)])
    capsys.readouterr()
    assert main(["replay", str(out / "manifest.json"), "--work-bits", "200"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["status"] == "tolerant-match"


def test_replay_reports_altered_checksum(tmp_path):
    out = tmp_path / "o"
    main(["run", write(tmp_path, HIT), "--out", str(out)])
    m = json.loads((out / "manifest.json").read_text())
    m["files"]["hits.csv"] = "0" * 64
    (out / "manifest.json").write_text(json.dumps(m))
    assert main(["replay", str(out / "manifest.json")]) == EXIT_REPLAY


def test_budget_failure_exit_code(tmp_path):
    big = json.loads(json.dumps(CORR))
    big["params"]["pairs"] = [[40, 41]]
    assert main(["run", write(tmp_path, big), "--out", str(tmp_path / "o")]) == EXIT_BUDGET


def test_precision_failure_exit_code(tmp_path):
    data = {"experiment": "hit", "seed": 0, "precision": {"bit_cap": 1024},
            "params": {"sequence": {"family": "stretched", "alpha": "2", "b": "1/2"},
                       "target": {"a": "1/5"}, "N": 2 * 10**6, "seeds": 1,
                       "A": {"kind": "explicit", "values": [2 * 10**6]}}}
    assert main(["run", write(tmp_path, data), "--out", str(tmp_path / "o")]) == EXIT_PRECISION


def test_presets_resolve(tmp_path):
    data = {"experiment": "preset", "seed": 2, "params": {"name": "lln-default", "seeds": 3}}
    assert main(["run", write(tmp_path, data), "--out", str(tmp_path / "o")]) == EXIT_OK
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["preset"] == "lln-default" and summary["seeds"] == 3


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "shrinktarget", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "replay" in r.stdout
