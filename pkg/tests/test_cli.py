"""End-to-end command behavior: exit codes, artifacts, determinism."""

import csv
import json
import re

import pytest

from avcsim.cli import SWEEP_COLUMNS, main
from avcsim.harness import TRACE_COLUMNS

TINY_STD = {
    "seed": 9,
    "avc": "bitflip",
    "Lambda": 0.0,
    "n": 16,
    "R_min": 0.25,
    "R_max": 0.5,
    "K": 4,
    "trials": 20,
    "messages_sampled": 2,
    "strategy": {"kind": "iid_mixture", "mixture": [1.0, 0.0]},
}


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_no_subcommand_exits_via_argparse():
    with pytest.raises(SystemExit):
        main([])


def test_capacity_command_prints_solution(tmp_path, capsys):
    out = tmp_path / "cap"
    rc = main(["capacity", "--avc", "bitflip", "--model", "std",
               "--lambda", "0.25", "--tol", "1e-5", "--seed", "0",
               "--out", str(out)])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert abs(doc["value"] - 0.18872187554086717) < 2e-3
    assert abs(doc["P_star"][0] - 0.5) < 5e-3
    assert doc["units"] == "bits/channel-use"
    summary = json.loads((out / "summary.json").read_text())
    assert re.fullmatch(r"[0-9a-f]{12}", summary["config_hash"])
    assert summary["capacity"]["value"] == doc["value"]
    assert summary["config"]["Lambda"] == 0.25


@pytest.mark.parametrize("argv_extra,missing", [
    ([], "seed"),
    (["--seed", "-1"], "seed"),
    (["--seed", "1", "--avc", "no-such-channel"], "avc"),
])
def test_config_validation_exit_code(tmp_path, capsys, argv_extra, missing):
    rc = main(["rateless-std", "--out", str(tmp_path)] + argv_extra)
    assert rc == 2
    err = capsys.readouterr().err
    assert "config error" in err
    assert missing in err


def test_unknown_config_field_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, {"seed": 1, "mystery_knob": 3})
    rc = main(["rateless-std", "--config", cfg, "--out", str(tmp_path)])
    assert rc == 2
    assert "mystery_knob" in capsys.readouterr().err


def test_invalid_json_rejected(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    rc = main(["rateless-std", "--config", str(path), "--out", str(tmp_path)])
    assert rc == 2
    assert "invalid JSON" in capsys.readouterr().err


def test_missing_config_file_rejected(tmp_path, capsys):
    rc = main(["rateless-std", "--config", str(tmp_path / "nope.json"),
               "--out", str(tmp_path)])
    assert rc == 2
    assert "file not found" in capsys.readouterr().err


def test_bad_strategy_kind_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, {**TINY_STD, "strategy": {"kind": "psychic"}})
    rc = main(["rateless-std", "--config", cfg, "--out", str(tmp_path)])
    assert rc == 2
    assert "strategy.kind" in capsys.readouterr().err


def test_incomplete_strategy_rejected(tmp_path, capsys):
    cfg = write_config(
        tmp_path, {**TINY_STD, "strategy": {"kind": "fixed_sequence"}})
    rc = main(["rateless-std", "--config", cfg, "--out", str(tmp_path)])
    assert rc == 2
    assert "strategy.sequence" in capsys.readouterr().err


def test_zero_trials_validates_and_writes_empty_artifacts(tmp_path, capsys):
    cfg = write_config(tmp_path, TINY_STD)
    out = tmp_path / "empty"
    rc = main(["rateless-std", "--config", cfg, "--trials", "0",
               "--out", str(out)])
    assert rc == 0
    assert "config valid" in capsys.readouterr().out
    rows = (out / "traces.csv").read_text().strip().splitlines()
    assert rows == [",".join(TRACE_COLUMNS)]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["error_estimate"] is None


def test_rateless_std_run_is_reproducible(tmp_path, capsys):
    cfg = write_config(tmp_path, TINY_STD)
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert main(["rateless-std", "--config", cfg, "--out", str(out_a)]) == 0
    assert main(["rateless-std", "--config", cfg, "--out", str(out_b)]) == 0
    capsys.readouterr()
    assert (out_a / "traces.csv").read_bytes() == (out_b / "traces.csv").read_bytes()
    assert (out_a / "traces.jsonl").read_bytes() == (out_b / "traces.jsonl").read_bytes()
    assert (out_a / "summary.json").read_bytes() == (out_b / "summary.json").read_bytes()
    with open(out_a / "traces.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(TRACE_COLUMNS)
    assert len(rows) == 1 + 40  # 2 messages x 20 trials, one kept trace each
    time_col = TRACE_COLUMNS.index("decode_time")
    assert {r[time_col] for r in rows[1:]} == {"4"}


def test_flag_overrides_config(tmp_path, capsys):
    cfg = write_config(tmp_path, TINY_STD)
    out = tmp_path / "ov"
    rc = main(["rateless-std", "--config", cfg, "--lambda", "0.1",
               "--trials", "0", "--out", str(out)])
    assert rc == 0
    capsys.readouterr()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["Lambda"] == 0.1


def test_audit_command_clean_run(tmp_path, capsys):
    cfg = write_config(tmp_path, {**TINY_STD, "trials": 10})
    out = tmp_path / "audit"
    rc = main(["audit", "--config", cfg, "--out", str(out)])
    assert rc == 0
    stdout = capsys.readouterr().out
    assert "0 mismatches" in stdout
    assert "0 bracket violations" in stdout
    summary = json.loads((out / "summary.json").read_text())
    assert summary["decode_time_audit"]["mismatches"] == []


def test_sweep_capacity_rows(tmp_path, capsys):
    out = tmp_path / "sweep"
    rc = main(["sweep", "--axis", "Lambda", "--values", "0,0.1,0.25",
               "--capacity", "--model", "std", "--tol", "1e-4",
               "--avc", "bitflip", "--seed", "1", "--out", str(out)])
    assert rc == 0
    capsys.readouterr()
    with open(out / "sweep.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(SWEEP_COLUMNS)
    assert len(rows) == 4
    assert all(r[2] == "capacity" for r in rows[1:])
    values = [float(r[3]) for r in rows[1:]]
    assert values[0] >= values[1] - 5e-4
    assert values[1] >= values[2] - 5e-4


def test_brute_force_command(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "seed": 3,
        "avc": "bitflip",
        "Lambda": 0.25,
        "K": 4,
        "chunk_len": 2,
        "M_hi": 2,
        "N_override": 4,
        "strategy": {"kind": "iid_mixture", "mixture": [1.0, 0.0]},
    })
    out = tmp_path / "bf"
    rc = main(["brute-force", "--config", cfg, "--out", str(out)])
    assert rc == 0
    assert "standard max error" in capsys.readouterr().out
    summary = json.loads((out / "summary.json").read_text())
    std = summary["brute_force"]["standard"]["max_error"]
    nosy = summary["brute_force"]["nosy"]["max_error"]
    assert std <= nosy + 1e-12


def test_nonbinary_statistical_path_fails_loudly(tmp_path, capsys):
    rc = main(["rateless-std", "--avc", "real-adder", "--n", "4096",
               "--seed", "1", "--trials", "1", "--messages-sampled", "1",
               "--out", str(tmp_path)])
    assert rc == 1
    assert "binary" in capsys.readouterr().err
