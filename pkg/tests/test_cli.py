import json

import numpy as np
import pytest

from ivlate.cli import ingest_csv, main
from ivlate.errors import SchemaError
from ivlate.montecarlo import dgp_a, generate


def write_csv(path, header, rows):
    lines = [",".join(header)] + [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


def export_design_a(path, n=400, seed=1):
    data, _ = generate(dgp_a(), n, seed=seed)
    rows = np.column_stack([data.y, data.d, data.z, data.x[:, 1]])
    return write_csv(path, ["y", "d", "z", "x1"], rows.tolist())


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------


def test_three_row_file_loads_with_correct_binding(tmp_path):
    path = write_csv(
        tmp_path / "tiny.csv",
        ["y", "d", "z", "x1"],
        [[1.5, 1, 1, 0.2], [0.5, 0, 0, -0.1], [2.0, 1, 1, 0.4]],
    )
    data = ingest_csv(path)
    assert data.n == 3
    assert data.k == 2  # constant + x1
    assert data.y.tolist() == [1.5, 0.5, 2.0]
    assert data.d.tolist() == [1.0, 0.0, 1.0]
    assert data.z.tolist() == [1.0, 0.0, 1.0]
    assert data.x[:, 0].tolist() == [1.0, 1.0, 1.0]
    assert data.x[:, 1].tolist() == [0.2, -0.1, 0.4]


def test_non_binary_treatment_names_the_row(tmp_path):
    rows = [[float(i), 1, i % 2, 0.1] for i in range(10)]
    rows[6][1] = 2  # data row 7
    path = write_csv(tmp_path / "bad.csv", ["y", "d", "z", "x1"], rows)
    with pytest.raises(ValueError, match="row 7"):
        ingest_csv(path)


def test_schema_errors(tmp_path):
    with pytest.raises(SchemaError, match="missing required column"):
        ingest_csv(write_csv(tmp_path / "a.csv", ["y", "d", "x1"], [[1, 0, 0.5]]))
    with pytest.raises(SchemaError, match="duplicate"):
        ingest_csv(write_csv(tmp_path / "b.csv", ["y", "d", "z", "z"], [[1, 0, 1, 1]]))
    with pytest.raises(SchemaError, match="non-covariate"):
        ingest_csv(write_csv(tmp_path / "c.csv", ["y", "d", "z", "w1"], [[1, 0, 1, 1]]))
    with pytest.raises(SchemaError, match="no covariate columns"):
        ingest_csv(
            write_csv(tmp_path / "d.csv", ["y", "d", "z"], [[1, 0, 1]]),
            add_constant=False,
        )


def test_outcome_only_file_gets_constant_design(tmp_path):
    rows = [[float(i % 3), i % 2, (i + 1) % 2, ][:3] for i in range(12)]
    rows = [[float(i % 3), float(i % 2), float((i // 2) % 2)] for i in range(12)]
    path = write_csv(tmp_path / "nox.csv", ["y", "d", "z"], rows)
    data = ingest_csv(path)
    assert data.k == 1
    assert np.all(data.x == 1.0)


def test_non_finite_cell_rejected(tmp_path):
    rows = [[1.0, 1, 1, 0.1], [np.inf, 0, 0, 0.2], [1.0, 1, 0, 0.3]]
    path = write_csv(tmp_path / "inf.csv", ["y", "d", "z", "x1"], rows)
    with pytest.raises(ValueError, match="row 2"):
        ingest_csv(path)


# ---------------------------------------------------------------------------
# estimate command
# ---------------------------------------------------------------------------


def test_estimate_rejects_tiny_bootstrap(tmp_path, capsys):
    path = export_design_a(tmp_path / "a.csv")
    code = main(["estimate", "--input", path, "--b", "0", "--seed", "1"])
    assert code == 1
    assert "configuration error" in capsys.readouterr().err


def test_estimate_unknown_tag_is_config_error(tmp_path, capsys):
    path = export_design_a(tmp_path / "a.csv")
    code = main(["estimate", "--input", path, "--estimators", "nope", "--b", "20"])
    assert code == 1


def test_estimate_missing_file_is_data_error(tmp_path):
    code = main(["estimate", "--input", str(tmp_path / "missing.csv"), "--b", "20"])
    assert code == 2


def test_estimate_bad_cell_is_data_error(tmp_path):
    rows = [[1.0, 2, 1, 0.1]] * 8
    path = write_csv(tmp_path / "bad.csv", ["y", "d", "z", "x1"], rows)
    assert main(["estimate", "--input", path, "--b", "20"]) == 2


def test_estimate_degenerate_design_is_estimation_failure(tmp_path):
    # x1 constant duplicates the constant column: rank deficient.
    rows = [[float(i), float(i % 2), float((i // 2) % 2), 5.0] for i in range(20)]
    path = write_csv(tmp_path / "flat.csv", ["y", "d", "z", "x1"], rows)
    assert main(["estimate", "--input", path, "--b", "20", "--seed", "3"]) == 3


def test_estimate_report_is_deterministic_and_parses(tmp_path):
    path = export_design_a(tmp_path / "a.csv", n=300, seed=4)
    out1 = tmp_path / "r1.json"
    out2 = tmp_path / "r2.json"
    args = ["estimate", "--input", path, "--estimators", "++,x+,xx", "--b", "30",
            "--seed", "11", "--output"]
    assert main(args + [str(out1)]) == 0
    assert main(args + [str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    report = json.loads(out1.read_text())
    assert report["command"] == "estimate"
    assert [r["estimator"] for r in report["results"]] == ["++", "x+", "xx"]
    for row in report["results"]:
        assert np.isfinite(row["point"]) and row["sd"] >= 0.0
        assert row["ci"][0] <= row["ci"][1]
    assert report["config"]["n"] == 300


def test_estimators_coincide_with_wald_without_covariates(tmp_path):
    data, _ = generate(dgp_a(), 500, seed=5)
    rows = np.column_stack([data.y, data.d, data.z]).tolist()
    path = write_csv(tmp_path / "nox.csv", ["y", "d", "z"], rows)
    out = tmp_path / "r.json"
    assert main(["estimate", "--input", path, "--estimators", "++,x+,xx",
                 "--b", "20", "--seed", "2", "--output", str(out)]) == 0
    report = json.loads(out.read_text())
    z1 = data.z == 1.0
    wald = (data.y[z1].mean() - data.y[~z1].mean()) / (data.d[z1].mean() - data.d[~z1].mean())
    for row in report["results"]:
        assert row["point"] == pytest.approx(wald, rel=1e-10)


def test_estimate_round_trip_centered_estimator_lands_nearest_truth(tmp_path):
    # Export a design-A sample, run all three LATE estimators through the
    # CLI, and check the centered one sits closest to the known effect.
    path = export_design_a(tmp_path / "a.csv", n=2000, seed=12)
    out = tmp_path / "r.json"
    assert main(["estimate", "--input", path, "--estimators", "++,x+,xx",
                 "--b", "25", "--seed", "4", "--output", str(out)]) == 0
    report = json.loads(out.read_text())
    points = {row["estimator"]: row["point"] for row in report["results"]}
    assert all(np.isfinite(v) for v in points.values())
    gaps = {tag: abs(value - 1.0 / 9.0) for tag, value in points.items()}
    assert min(gaps, key=gaps.get) == "xx"


def test_estimate_csv_format(tmp_path):
    path = export_design_a(tmp_path / "a.csv", n=200, seed=6)
    out = tmp_path / "r.csv"
    assert main(["estimate", "--input", path, "--estimators", "++", "--b", "20",
                 "--seed", "1", "--format", "csv", "--output", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "estimator,point,sd,ci_low,ci_high"
    assert lines[1].startswith("++,")


# ---------------------------------------------------------------------------
# simulate command
# ---------------------------------------------------------------------------


def test_simulate_requires_seed_and_known_design(tmp_path, capsys):
    assert main(["simulate", "--dgp", "A", "--reps", "2", "--n", "60"]) == 1
    assert main(["simulate", "--dgp", "Q", "--reps", "2", "--n", "60", "--seed", "1"]) == 1


def test_simulate_reports_and_per_replicate_csv(tmp_path):
    out = tmp_path / "sim.json"
    reps_out = tmp_path / "reps.csv"
    args = [
        "simulate", "--dgp", "A", "--estimators", "++,xx", "--reps", "2",
        "--n", "120", "--seed", "7", "--output", str(out),
        "--replicates-out", str(reps_out),
    ]
    assert main(args) == 0
    report = json.loads(out.read_text())
    assert report["config"]["dgp"] == "A"
    assert {r["estimator"] for r in report["results"]} == {"++", "xx"}
    lines = reps_out.read_text().strip().splitlines()
    assert lines[0] == "rep,estimator,dim,value"
    assert len(lines) == 1 + 2 * 2  # two replicates, two estimators

    out2 = tmp_path / "sim2.json"
    reps2 = tmp_path / "reps2.csv"
    args2 = args[:-4] + ["--output", str(out2), "--replicates-out", str(reps2)]
    assert main(args2) == 0
    assert out.read_bytes() == out2.read_bytes()
    assert reps_out.read_bytes() == reps2.read_bytes()


# ---------------------------------------------------------------------------
# stratify command
# ---------------------------------------------------------------------------


def test_stratify_single_stratum_row_matches_wald(tmp_path):
    path = export_design_a(tmp_path / "a.csv", n=300, seed=8)
    out = tmp_path / "s.csv"
    assert main(["stratify", "--input", path, "--k", "1", "--b", "30",
                 "--seed", "5", "--format", "csv", "--output", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "interval_low,interval_high,estimate,ci_low,ci_high"
    assert len(lines) == 2
    data = ingest_csv(path)
    z1 = data.z == 1.0
    wald = (data.y[z1].mean() - data.y[~z1].mean()) / (data.d[z1].mean() - data.d[~z1].mean())
    assert float(lines[1].split(",")[2]) == pytest.approx(wald, rel=1e-10)


def test_stratify_constant_scores_merge_with_warning(tmp_path, capsys):
    data, _ = generate(dgp_a(), 400, seed=9)
    rows = np.column_stack([data.y, data.d, data.z]).tolist()
    path = write_csv(tmp_path / "nox.csv", ["y", "d", "z"], rows)
    out = tmp_path / "s.json"
    assert main(["stratify", "--input", path, "--k", "3", "--b", "30",
                 "--seed", "5", "--output", str(out)]) == 0
    err = capsys.readouterr().err
    assert "merged 3 requested strata down to 1" in err
    report = json.loads(out.read_text())
    assert report["config"]["k_effective"] == 1
    assert len(report["strata"]) == 1
    assert report["warnings"]


def test_stratify_emits_at_most_k_rows(tmp_path):
    from ivlate.montecarlo import dgp_c

    data, _ = generate(dgp_c(), 1000, seed=11)
    rows = np.column_stack([data.y, data.d, data.z, data.x[:, 1]]).tolist()
    path = write_csv(tmp_path / "c.csv", ["y", "d", "z", "x1"], rows)
    out = tmp_path / "s.csv"
    assert main(["stratify", "--input", path, "--k", "10", "--b", "20",
                 "--seed", "3", "--format", "csv", "--output", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert 2 <= len(lines) <= 11


def test_stratify_json_report_is_deterministic(tmp_path):
    path = export_design_a(tmp_path / "a.csv", n=400, seed=10)
    out1, out2 = tmp_path / "s1.json", tmp_path / "s2.json"
    args = ["stratify", "--input", path, "--k", "2", "--b", "40", "--seed", "6", "--output"]
    assert main(args + [str(out1)]) == 0
    assert main(args + [str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    report = json.loads(out1.read_text())
    assert len(report["strata"]) == report["config"]["k_effective"]
    assert np.isfinite(report["late"]["estimate"])


def test_help_exits_cleanly():
    assert main(["--help"]) == 0
