import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from ivpolicy.cli import cmd_validate, dumps, fmt, main

DATA = Path(__file__).resolve().parents[1] / "src" / "ivpolicy" / "data"
GOLD = Path(__file__).resolve().parent / "golden"
FIXTURE_CFG = DATA / "fixture_config.json"


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main([*map(str, args), "--output", str(out)])
    return code, (out.read_text() if out.exists() else None)


def read_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], [dict(zip(rows[0], r)) for r in rows[1:]]


def write_cfg(tmp_path, **changes):
    cfg = json.loads(FIXTURE_CFG.read_text())
    cfg["input"] = str(DATA / "fixture.csv")
    cfg.update(changes)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return p


@pytest.mark.parametrize("cmd,golden", [("fit", "fit_fixture.json"), ("bounds", "bounds_fixture.csv"),
                                        ("scores", "scores_fixture.csv")])
def test_golden_outputs(tmp_path, cmd, golden):
    code, text = run(tmp_path, cmd, FIXTURE_CFG)
    assert code == 0
    assert text == (GOLD / golden).read_text()


def test_fit_output_fields(tmp_path):
    _, text = run(tmp_path, "fit", FIXTURE_CFG)
    out = json.loads(text)
    for key in ("policy", "objective", "method", "exact", "treated_share", "tie_count", "clipping_counts",
                "score_summary", "schema_version"):
        assert key in out
    assert out["exact"] is True and out["method"] == "exhaustive_quadrant"


def test_same_config_twice_identical(tmp_path):
    a = run(tmp_path, "fit", FIXTURE_CFG, name="a")[1]
    b = run(tmp_path, "fit", FIXTURE_CFG, name="b")[1]
    c = run(tmp_path, "fit", FIXTURE_CFG, "--threads", 8, name="c")[1]
    assert a == b == c


def test_seed_flag_overrides_config(tmp_path):
    a = json.loads(run(tmp_path, "fit", FIXTURE_CFG, "--seed", 123, name="a")[1])
    assert a["seed"] == 123


def test_full_compliance_mmr_equals_late(tmp_path):
    a = json.loads(run(tmp_path, "fit", DATA / "full_compliance_mmr.json", name="a")[1])
    b = json.loads(run(tmp_path, "fit", DATA / "full_compliance_late.json", name="b")[1])
    assert a["policy"] == b["policy"]
    assert a["treated_share"] == b["treated_share"]


def test_full_compliance_bounds_collapse(tmp_path):
    _, text = run(tmp_path, "bounds", DATA / "full_compliance_mmr.json")
    _, rows = read_csv(text)
    assert all(r["tau_low"] == r["tau_high"] for r in rows)


def test_bounds_rows_ordered(tmp_path):
    _, text = run(tmp_path, "bounds", FIXTURE_CFG)
    header, rows = read_csv(text)
    assert header[:7] == ["row", "y0_low", "y0_high", "y1_low", "y1_high", "tau_low", "tau_high"]
    assert all(float(r["tau_low"]) <= float(r["tau_high"]) for r in rows)


def test_zero_residual_scores_agree(tmp_path):
    _, text = run(tmp_path, "scores", DATA / "zero_residual_config.json")
    _, rows = read_csv(text)
    assert all(r["gamma_plugin"] == r["gamma_orthogonal"] for r in rows)
    assert all(float(r["adjustment"]) == 0 for r in rows)


def test_score_columns_recombine(tmp_path):
    _, text = run(tmp_path, "scores", FIXTURE_CFG)
    header, rows = read_csv(text)
    L = sum(1 for h in header if h.startswith("indicator"))
    for r in rows:
        for mode in ("plugin", "orthogonal"):
            g = float(r[f"phi0_{mode}"])
            g += sum(float(r[f"sign{l}"]) * float(r[f"phi{l}_{mode}"]) * int(r[f"indicator{l}"]) for l in range(1, L + 1))
            assert abs(g - float(r[f"gamma_{mode}"])) <= 1e-12


def test_relative_and_bundled_paths(tmp_path):
    code, text = run(tmp_path, "fit", "bundled:fixture_config.json")
    assert code == 0 and text == (GOLD / "fit_fixture.json").read_text()


@pytest.mark.parametrize("change,code", [
    ({"unknown_key": 1}, 2),
    ({"scheme": "sharp"}, 2),
    ({"folds": 1}, 2),
    ({"criterion": {"kind": "hurwicz_impact"}}, 2),
    ({"criterion": {"kind": "maximin_welfare"}, "scheme": "point_late"}, 2),
    ({"columns": {"y": "y", "d": "d", "z": "z", "x": ["x1", "nope"]}}, 3),
    ({"outcome_range": [0, 0.5]}, 3),
    ({"input": "does_not_exist.csv"}, 3),
])
def test_exit_codes(tmp_path, change, code):
    assert run(tmp_path, "fit", write_cfg(tmp_path, **change))[0] == code


def test_missing_value_is_data_error(tmp_path):
    lines = (DATA / "fixture.csv").read_text().splitlines()
    cells = lines[5].split(",")
    cells[0] = ""
    lines[5] = ",".join(cells)
    p = tmp_path / "holes.csv"
    p.write_text("\n".join(lines) + "\n")
    assert run(tmp_path, "fit", write_cfg(tmp_path, input=str(p)))[0] == 3


def _csv(tmp_path, y, d, z, x):
    p = tmp_path / "t.csv"
    rows = ["y,d,z,x1,x2"] + [f"{a},{b},{c},{u},{v}" for a, b, c, (u, v) in zip(y, d, z, x)]
    p.write_text("\n".join(rows) + "\n")
    return p


def test_numerical_error_exit_codes(tmp_path):
    rng = np.random.default_rng(0)
    n = 120
    x = rng.random((n, 2))
    z = rng.integers(0, 2, n)
    # everyone treated: the (0,0) cell is empty
    p = _csv(tmp_path, rng.random(n), np.ones(n, dtype=int), z, x)
    cfg = write_cfg(tmp_path, input=str(p), columns={"y": "y", "d": "d", "z": "z", "x": ["x1", "x2"]}, folds=2)
    assert run(tmp_path, "fit", cfg)[0] == 4
    # instrument unrelated to treatment: first stage too weak for the LATE
    d = rng.integers(0, 2, n)
    p = _csv(tmp_path, rng.random(n), d, z, x)
    cfg = write_cfg(tmp_path, input=str(p), columns={"y": "y", "d": "d", "z": "z", "x": ["x1", "x2"]}, folds=2,
                    scheme="point_late", epsilon_late=0.9)
    assert run(tmp_path, "fit", cfg)[0] == 4


def test_validate_bundled(tmp_path):
    code, text = run(tmp_path, "validate", "bundled:jtpa_counts.json")
    assert code == 0 and json.loads(text)["status"] == "pass"


def test_validate_perturbed_names_margin():
    counts = json.loads((DATA / "jtpa_counts.json").read_text())
    for i in range(2):
        for j in range(2):
            bad = json.loads(json.dumps(counts))
            bad["cells"][i][j] += 1
            with pytest.raises(ValueError) as e:
                cmd_validate(bad)
            msg = str(e.value)
            assert f"row_totals[{i}]" in msg and f"col_totals[{j}]" in msg and "total" in msg


def test_validate_exit_code_and_message(tmp_path, capsys):
    counts = json.loads((DATA / "jtpa_counts.json").read_text())
    counts["cells"][1][0] = 44
    p = tmp_path / "c.json"
    p.write_text(json.dumps(counts))
    assert main(["validate", str(p)]) == 3
    assert "col_totals[0]" in capsys.readouterr().err


def test_validate_all_zero():
    out = json.loads(cmd_validate({"cells": [[0, 0], [0, 0]], "row_totals": [0, 0], "col_totals": [0, 0], "total": 0}))
    assert out["status"] == "pass"


def test_simulate_writes_json_and_csv(tmp_path):
    study = {
        "schema_version": 1, "dgp": {"noise_scale": 0.5}, "n_grid": [100, 200, 300], "replications": 2,
        "learner": {"n_rounds": 10}, "n_oracle": 2000, "n_eval": 5000, "eta": 0.05, "seed": 1,
    }
    cfg = tmp_path / "study.json"
    cfg.write_text(json.dumps(study))
    out = tmp_path / "rep.json"
    assert main(["simulate", str(cfg), "--output", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["command"] == "simulate" and set(rep["summary"]) == {"plugin", "orthogonal"}
    rows = out.with_suffix(".csv").read_text().splitlines()
    assert rows[0] == "n,mode,replication,regret" and len(rows) == 1 + 3 * 2 * 2


def test_number_format():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(float("inf")) == '"inf"'
    assert dumps({"b": 1, "a": [1.5, None, True]}) == '{\n  "a": [1.5, null, true],\n  "b": 1\n}'


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "ivpolicy", "validate", "bundled:jtpa_counts.json"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and '"status": "pass"' in r.stdout
