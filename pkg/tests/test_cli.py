from __future__ import annotations

import json
from pathlib import Path

import pytest

from gkpforge.cli import main
from gkpforge.resources import resource_path, schema_path

jsonschema = pytest.importorskip("jsonschema")

RHS_FIXTURE = str(resource_path("synthetic-rhs-noiseless-v1"))


@pytest.fixture(autouse=True)
def pinned_timestamp(monkeypatch):
    monkeypatch.setenv("GKPFORGE_TIMESTAMP", "2026-08-09T00:00:00+00:00")


def _run(capsys, *argv) -> tuple[int, str, str]:
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _run_json(capsys, *argv) -> tuple[int, dict]:
    code, out, _ = _run(capsys, *argv, "--format", "json")
    return code, json.loads(out)


def _validate(report: dict, schema_name: str) -> None:
    schema = json.loads(schema_path(schema_name).read_text(encoding="utf-8"))
    jsonschema.validate(report, schema)


# ---------------------------------------------------------------------------
# budget

def test_budget_default(capsys):
    code, report = _run_json(capsys, "budget")
    assert code == 0
    _validate(report, "budget_report")
    assert report["scenario"] == "current"
    assert report["dominant"] == "TNP"
    assert 0.7e-13 <= report["combined_eV"] <= 2e-13
    assert report["manifest"]["command"] == "budget"
    assert report["manifest"]["config_versions"]["anchors"] == "mo41-anchors-v1"


def test_budget_projected(capsys):
    code, report = _run_json(capsys, "budget", "--scenario", "projected")
    assert code == 0
    assert 0.7e-14 <= report["combined_eV"] <= 2e-14


def test_budget_table_output(capsys):
    code, out, _ = _run(capsys, "budget")
    assert code == 0
    assert "TNP" in out
    assert "Resolved: use j >= 3/2" in out
    assert "e-13" in out
    # scientific notation with a period decimal separator, locale-proof
    assert "," not in out.replace(", ", " ")


def test_budget_missing_anchors_file_exit2(capsys):
    code, _, err = _run(capsys, "budget", "--anchors", "missing_anchors.json")
    assert code == 2
    assert "missing_anchors.json" in err


def test_budget_writes_artifact(capsys, tmp_path):
    code, _, _ = _run(capsys, "budget", "--out", str(tmp_path))
    assert code == 0
    payload = json.loads((tmp_path / "budget.json").read_text(encoding="utf-8"))
    _validate(payload, "budget_report")


# ---------------------------------------------------------------------------
# solvability

def test_solvability_default_table(capsys):
    code, out, _ = _run(capsys, "solvability")
    assert code == 0
    assert "No (2 < 3)" in out
    assert "Yes (3 = 3)" in out
    assert "Yes (4 > 3)" in out
    assert "Yes (6 ≫ 3)" in out


def test_solvability_selected_variants(capsys):
    code, report = _run_json(capsys, "solvability")
    assert code == 0
    _validate(report, "solvability_report")
    assert report["selected"]["verdict"] == "No (2 < 3)"

    code, report = _run_json(capsys, "solvability", "--add-isotope", "91")
    assert report["selected"]["verdict"] == "Yes (3 = 3)"

    code, report = _run_json(capsys, "solvability", "--transitions", "2")
    assert report["selected"]["verdict"] == "Yes (4 > 3)"

    code, report = _run_json(capsys, "solvability", "--add-isotope", "91", "--transitions", "2")
    assert report["selected"]["verdict"] == "Yes (6 ≫ 3)"


def test_solvability_enumeration_labels(capsys):
    code, report = _run_json(capsys, "solvability")
    labels = [row["label"] for row in report["topologies"]]
    assert labels == ["Stable, 1 trans.", "+ FRIB 91Mo", "Stable, 2 trans.", "+ FRIB + 2 trans."]
    verdicts = [row["verdict"] for row in report["topologies"]]
    assert verdicts == ["No (2 < 3)", "Yes (3 = 3)", "Yes (4 > 3)", "Yes (6 ≫ 3)"]


# ---------------------------------------------------------------------------
# condition

def test_condition_small_run(capsys):
    code, report = _run_json(capsys, "condition", "--samples", "2000", "--seed", "11")
    assert code == 0
    _validate(report, "condition_report")
    summary = report["summary"]
    assert summary["sample_count"] == 2000
    assert summary["p5"] <= summary["median"] <= summary["p95"]


def test_condition_single_sample(capsys):
    code, report = _run_json(capsys, "condition", "--samples", "1", "--seed", "11")
    assert code == 0
    s = report["summary"]
    assert s["mean"] == s["median"] == s["p5"] == s["p95"]
    assert s["std"] == 0.0


def test_condition_deterministic_bytes(capsys, tmp_path):
    args = ["condition", "--samples", "1500", "--seed", "77", "--format", "json"]
    code1, out1, _ = _run(capsys, *args)
    code2, out2, _ = _run(capsys, *args)
    assert code1 == code2 == 0
    assert out1 == out2

    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(args[:-2] + ["--out", str(out_a)]) == 0
    assert main(args[:-2] + ["--out", str(out_b)]) == 0
    capsys.readouterr()
    assert (out_a / "condition_histogram.csv").read_bytes() == (out_b / "condition_histogram.csv").read_bytes()
    assert (out_a / "condition.json").read_bytes() == (out_b / "condition.json").read_bytes()


def test_condition_histogram_schema(capsys, tmp_path):
    code, _, _ = _run(capsys, "condition", "--samples", "500", "--seed", "5", "--out", str(tmp_path))
    assert code == 0
    lines = (tmp_path / "condition_histogram.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "bin_left,bin_right,count"
    assert len(lines) == 1 + 48 + 2  # header, bins, overflow, rank-deficient
    assert lines[-1].startswith("rank_deficient,")
    total = sum(int(line.split(",")[2]) for line in lines[1:])
    assert total == 500


# ---------------------------------------------------------------------------
# extract

def test_extract_noiseless_fixture_recovers(capsys):
    code, report = _run_json(capsys, "extract", "--chain", "mo-chain-frib-synthetic-v1",
                             "--rhs", RHS_FIXTURE)
    assert code == 0
    _validate(report, "extract_report")
    fixture = json.loads(Path(RHS_FIXTURE).read_text(encoding="utf-8"))
    truth = fixture["truth"]
    assert report["alpha_manko_hat"] == pytest.approx(truth["alpha_manko"], rel=1e-10)
    by_name = {b["name"]: b["value"] for b in report["background_estimates"]}
    assert by_name["qs_background"] == pytest.approx(truth["qs_background"], rel=1e-10)
    assert by_name["alpha_t_background"] == pytest.approx(truth["alpha_t_background"], rel=1e-10)


def test_extract_underdetermined_refused(capsys, tmp_path):
    fixture = json.loads(Path(RHS_FIXTURE).read_text(encoding="utf-8"))
    rows = [r for r in fixture["rows"] if r["A"] in (95, 97) and r["transition"] == "1s-2p3/2"]
    rhs_file = tmp_path / "stable_only.json"
    rhs_file.write_text(json.dumps({"rows": rows}), encoding="utf-8")
    code, _, err = _run(capsys, "extract", "--chain", "mo-chain-v1", "--rhs", str(rhs_file))
    assert code == 1
    assert "N_odd >= 3" in err


def test_extract_chi_bound_scale(capsys, tmp_path):
    # perturb the noiseless fixture with a seeded 1e-13 noise vector
    import numpy as np

    fixture = json.loads(Path(RHS_FIXTURE).read_text(encoding="utf-8"))
    rows = [dict(r) for r in fixture["rows"] if r["transition"] == "1s-2p3/2"]
    rng = np.random.default_rng(99)
    for r in rows:
        r["delta_eV"] = float(r["delta_eV"] + rng.normal(0.0, 1e-13))
        r["sigma_eV"] = 1e-13
    rhs_file = tmp_path / "noisy.json"
    rhs_file.write_text(json.dumps({"rows": rows}), encoding="utf-8")
    code, report = _run_json(capsys, "extract", "--chain", "mo-chain-frib-synthetic-v1",
                             "--rhs", str(rhs_file))
    assert code == 0
    assert 1e7 <= report["chi_bound"] <= 1e9  # order 1e8 coupling bound
    assert report["chi_bound"] == pytest.approx(report["alpha_manko_se"], rel=1e-9)


def test_extract_missing_rhs_file(capsys):
    code, _, err = _run(capsys, "extract", "--rhs", "nowhere.json")
    assert code == 2
    assert "nowhere.json" in err


def test_extract_bad_sigma_rejected(capsys, tmp_path):
    rhs_file = tmp_path / "bad.json"
    rhs_file.write_text(json.dumps({"rows": [
        {"A": 95, "transition": "1s-2p3/2", "delta_eV": 1e-13, "sigma_eV": 0.0}
    ]}), encoding="utf-8")
    code, _, err = _run(capsys, "extract", "--rhs", str(rhs_file))
    assert code == 2
    assert "sigma" in err


# ---------------------------------------------------------------------------
# milestones / ramsey

def test_milestones_lookup(capsys):
    code, report = _run_json(capsys, "milestones", "--target", "1e-16")
    assert code == 0
    _validate(report, "milestones_report")
    assert report["target"]["required_advance"] == "Qs ratios to 0.01% (muonic atoms)"
    assert report["target"]["era"] == "electromagnetic subtraction"

    code, report = _run_json(capsys, "milestones", "--target", "1e-19")
    assert report["target"]["era"] == "quantum metrology"


def test_milestones_out_of_range(capsys):
    code, _, err = _run(capsys, "milestones", "--target", "1e-5")
    assert code == 2
    assert "outside" in err


def test_ramsey_decay_limited(capsys):
    code, report = _run_json(capsys, "ramsey", "--half-life", "930", "--tr", "671")
    assert code == 0
    _validate(report, "ramsey_report")
    assert 666.0 <= report["T_R_opt_s"] <= 676.0
    assert 2.2e-4 <= report["per_shot_linewidth_Hz"] <= 2.5e-4


def test_ramsey_warns_beyond_optimum(capsys):
    code, report = _run_json(capsys, "ramsey", "--half-life", "930", "--tr", "2000")
    assert code == 0
    assert report["warning"] is not None
    assert report["decay_penalty_at_request"] > 1.0
    code, out, _ = _run(capsys, "ramsey", "--half-life", "930", "--tr", "2000")
    assert "WARNING" in out


def test_ramsey_stable(capsys):
    code, report = _run_json(capsys, "ramsey", "--half-life", "stable", "--tr", "1", "--reps", "1000000")
    assert code == 0
    assert report["T_R_opt_s"] is None
    assert report["campaign_sensitivity_Hz"] == pytest.approx(1 / (2 * 3.141592653589793) / 1000.0, rel=1e-9)


def test_ramsey_invalid_input(capsys):
    code, _, _ = _run(capsys, "ramsey", "--half-life", "930", "--tr", "-5")
    assert code == 2


# ---------------------------------------------------------------------------
# cross-command behavior

def test_csv_format_budget_and_solvability(capsys):
    code, out, _ = _run(capsys, "budget", "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "key,value"
    assert any(line.startswith("dominant,TNP") for line in lines)
    assert any(line.startswith("entries,") for line in lines)  # per-barrier row group

    code, out, _ = _run(capsys, "solvability", "--format", "csv")
    assert code == 0
    assert "No (2 < 3)" in out and "Yes (3 = 3)" in out


def test_data_dir_override(capsys, tmp_path, monkeypatch):
    import json as _json
    from gkpforge.resources import resource_path

    original = _json.loads(Path(resource_path("mo-chain-v1")).read_text(encoding="utf-8"))
    for iso in original["isotopes"]:
        if iso["A"] == 95:
            iso["Qs"] = {"value": -0.044, "sigma": 0.002}
    (tmp_path / "mo_chain_v1.json").write_text(_json.dumps(original), encoding="utf-8")

    monkeypatch.setenv("GKPFORGE_DATA_DIR", str(tmp_path))
    assert str(resource_path("mo-chain-v1")).startswith(str(tmp_path))
    from gkpforge.nucdata import load_bundled_chain

    chain = load_bundled_chain("mo-chain-v1")
    assert chain.isotope(95).Qs.value == -0.044

    # names not present in the override directory fall back to the bundle
    assert not str(resource_path("milestones-v1")).startswith(str(tmp_path))
