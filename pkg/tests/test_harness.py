import csv
import json
from pathlib import Path

import numpy as np
import pytest

from zonofd.harness import (
    COMPARE_CATEGORIES,
    DETECTION_BIN_LABELS,
    detection_bin,
    run_afd_vs_pfd,
    run_input_grid,
    run_scenario,
    write_compare,
    write_grid,
    write_polygons,
    write_scenario_echo,
    write_trace,
)
from zonofd.scenario import load_scenario

SCEN_DIR = Path(__file__).resolve().parents[1] / "scenarios"


@pytest.fixture(scope="module")
def pfd1():
    return load_scenario(SCEN_DIR / "pfd_fault1_unconstrained.json")


@pytest.fixture(scope="module")
def afd1():
    return load_scenario(SCEN_DIR / "afd_fault1.json")


class TestRunScenario:
    def test_healthy_run_never_detects(self, pfd1):
        s = pfd1.with_overrides(true_mode_index=0, true_fault_value=None, horizon=20)
        for seed in (0, 1):
            rec = run_scenario(s.with_overrides(seed=seed))
            assert rec.detection_step is None
            assert rec.sound

    def test_single_step_horizon(self, pfd1):
        rec = run_scenario(pfd1.with_overrides(horizon=1))
        assert {row.step for row in rec.rows} == {1}
        assert len(rec.rows) == 3
        assert len(rec.inputs) == 1

    def test_deterministic(self, pfd1):
        from zonofd.harness import _row_values

        a = run_scenario(pfd1.with_overrides(horizon=6, seed=3))
        b = run_scenario(pfd1.with_overrides(horizon=6, seed=3))
        assert len(a.rows) == len(b.rows)
        for ra, rb in zip(a.rows, b.rows):
            assert _row_values(ra) == _row_values(rb)

    def test_fault1_isolates_quickly(self, pfd1):
        rec = run_scenario(pfd1.with_overrides(horizon=10, seed=0))
        assert rec.isolation_step is not None and rec.isolation_step <= 3
        assert rec.isolated_mode == 1
        assert rec.detection_step <= rec.isolation_step
        assert rec.sound

    def test_constrained_run_audited(self):
        s = load_scenario(SCEN_DIR / "pfd_fault1_constrained.json").with_overrides(horizon=5)
        rec = run_scenario(s)
        assert all(row.stability_ok for row in rec.rows)

    def test_exclusion_rejection_never_hits_true_mode(self, afd1):
        # a mode whose exclusion set drops the origin is guaranteed wrong
        for seed in (0, 1, 2):
            rec = run_scenario(afd1.with_overrides(horizon=8, seed=seed))
            for row in rec.rows:
                if row.exclusion_contains is False:
                    assert row.mode != 1  # mode 1 is the injected fault

    def test_afd_run_logs_exclusion(self, afd1):
        rec = run_scenario(afd1.with_overrides(horizon=4, seed=0))
        assert all(row.exclusion_contains is not None for row in rec.rows)
        assert all(np.linalg.norm(u) <= 4.0 + 1e-9 for u in rec.inputs)
        assert rec.sound

    def test_soundness_violation_detected(self, pfd1):
        # start the true state far outside the observer seed: the containment
        # guarantee is void and the audit must flag the run
        s = pfd1.with_overrides(x0=np.array([6.0, 6.0]), horizon=4)
        rec = run_scenario(s.with_overrides(seed=0))
        assert not rec.sound
        assert rec.violations
        from zonofd.harness import SoundnessError
        with pytest.raises(SoundnessError):
            run_scenario(s.with_overrides(seed=0), fail_unsound=True)

    def test_gains_recorded(self, pfd1):
        rec = run_scenario(pfd1.with_overrides(horizon=3))
        assert len(rec.gains) == 3
        assert all(len(step_gains) == 3 for step_gains in rec.gains)
        assert rec.gains[0][0].shape == (2, 2)

    def test_inject_at_midrun_audits_healthy_prefix(self, pfd1):
        s = pfd1.with_overrides(inject_at=5, horizon=8)
        rec = run_scenario(s.with_overrides(seed=0))
        # pre-injection the healthy mode must stay consistent
        for row in rec.rows:
            if row.step <= 5 and row.mode == 0:
                assert row.contains_origin
        assert rec.sound


class TestDetectionBins:
    @pytest.mark.parametrize("step,label", [
        (1, "1"), (2, "2-6"), (6, "2-6"), (7, "7-11"), (11, "7-11"),
        (12, "12-26"), (26, "12-26"), (27, "27-41"), (41, "27-41"),
        (42, "42+"), (71, "42+"), (None, "none"), (72, "none"),
    ])
    def test_edges(self, step, label):
        assert detection_bin(step, 71) == label

    def test_partition(self):
        # every step in [1, horizon] plus the sentinel lands in exactly one bin
        for step in list(range(1, 72)) + [None]:
            assert detection_bin(step, 71) in DETECTION_BIN_LABELS


class TestInputGrid:
    def test_structure_and_classification(self, pfd1):
        base = pfd1.with_overrides(horizon=3)
        axis = np.array([-0.26, 0.0, 0.26])
        res = run_input_grid(base, axis, ["pfd-unconstrained", "fixed-gain"])
        assert res.detection["pfd-unconstrained"].shape == (3, 3)
        assert res.classification.shape == (3, 3)
        swapped = run_input_grid(base, axis, ["fixed-gain", "pfd-unconstrained"])
        flip = {"faster": "slower", "slower": "faster", "equal": "equal",
                "neither-detects": "neither-detects"}
        for i in range(3):
            for j in range(3):
                assert swapped.classification[i, j] == flip[res.classification[i, j]]

    def test_full_grid_has_196_cells(self, pfd1):
        base = pfd1.with_overrides(horizon=1, design="fixed-gain")
        axis = -0.26 + 0.04 * np.arange(14)
        res = run_input_grid(base, axis, ["fixed-gain"])
        assert res.detection["fixed-gain"].size == 196

    def test_sentinel_encoding(self, pfd1):
        base = pfd1.with_overrides(horizon=2, design="fixed-gain",
                                   true_mode_index=0, true_fault_value=None)
        res = run_input_grid(base, np.array([0.0]), ["fixed-gain"])
        assert res.detection["fixed-gain"][0, 0] == 3  # horizon + 1

    def test_bin_counts_sum(self, pfd1):
        base = pfd1.with_overrides(horizon=3, design="fixed-gain")
        axis = np.array([-0.2, 0.2])
        res = run_input_grid(base, axis, ["fixed-gain"])
        counts = res.bin_counts("fixed-gain")
        assert sum(counts.values()) == 4

    def test_parallel_matches_serial(self, pfd1):
        base = pfd1.with_overrides(horizon=2, design="fixed-gain")
        axis = np.array([-0.1, 0.1])
        serial = run_input_grid(base, axis, ["fixed-gain"], parallel=1)
        par = run_input_grid(base, axis, ["fixed-gain"], parallel=2)
        assert np.array_equal(serial.detection["fixed-gain"], par.detection["fixed-gain"])


@pytest.fixture(scope="module")
def compare_result():
    base = load_scenario(SCEN_DIR / "afd_vs_pfd_fault1.json")
    return run_afd_vs_pfd(base, np.array([-0.26, 0.0, 0.26]), horizon=8)


class TestCompare:
    def test_partition(self, compare_result):
        counts = compare_result.category_counts()
        assert set(counts) == set(COMPARE_CATEGORIES)
        assert sum(counts.values()) == 9

    def test_afd_column_constant(self, compare_result):
        assert isinstance(compare_result.afd_step, int)

    def test_fraction_consistent(self, compare_result):
        counts = compare_result.category_counts()
        expect = 1.0 - counts["pfd-faster"] / 9
        assert compare_result.afd_faster_or_equal_fraction() == pytest.approx(expect)


class TestEmission:
    def test_trace_csv_deterministic(self, pfd1, tmp_path):
        rec = run_scenario(pfd1.with_overrides(horizon=4, seed=5))
        write_trace(rec, tmp_path / "a.csv")
        rec2 = run_scenario(pfd1.with_overrides(horizon=4, seed=5))
        write_trace(rec2, tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_trace_header(self, pfd1, tmp_path):
        rec = run_scenario(pfd1.with_overrides(horizon=2))
        write_trace(rec, tmp_path / "trace.csv")
        with open(tmp_path / "trace.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][:8] == ["step", "mode", "residual-center-norm", "f-norm-size",
                               "excluding-degree", "contains-origin", "verdict", "gamma-star"]
        assert len(rows) == 1 + 2 * 3

    def test_trace_json(self, pfd1, tmp_path):
        rec = run_scenario(pfd1.with_overrides(horizon=2))
        write_trace(rec, tmp_path / "trace.json", fmt="json")
        payload = json.loads((tmp_path / "trace.json").read_text())
        assert len(payload) == 6
        assert payload[0]["step"] == "1"

    def test_polygons_closed(self, pfd1, tmp_path):
        rec = run_scenario(pfd1.with_overrides(horizon=2), collect_polygons=True)
        write_polygons(rec, tmp_path / "poly")
        files = sorted((tmp_path / "poly").glob("*.csv"))
        assert len(files) == 6
        with open(files[0]) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["x", "y"]
        assert rows[1] == rows[-1]

    def test_grid_csv_rows(self, pfd1, tmp_path):
        base = pfd1.with_overrides(horizon=1, design="fixed-gain")
        axis = -0.26 + 0.04 * np.arange(14)
        res = run_input_grid(base, axis, ["fixed-gain"])
        write_grid(res, tmp_path / "grid.csv")
        with open(tmp_path / "grid.csv") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 1 + 196
        assert rows[0][:4] == ["u1", "u2", "method", "detection-step"]

    def test_compare_csv(self, tmp_path):
        base = load_scenario(SCEN_DIR / "afd_vs_pfd_fault1.json")
        res = run_afd_vs_pfd(base, np.array([-0.1, 0.1]), horizon=4)
        write_compare(res, tmp_path / "compare.csv")
        with open(tmp_path / "compare.csv") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 5
        assert all(r[4] in COMPARE_CATEGORIES for r in rows[1:])

    def test_emit_results_dispatch(self, pfd1, tmp_path):
        from zonofd.harness import emit_results

        rec = run_scenario(pfd1.with_overrides(horizon=2), collect_polygons=True)
        emit_results(rec, tmp_path / "run", scenario=pfd1)
        assert (tmp_path / "run" / "trace.csv").exists()
        assert (tmp_path / "run" / "scenario-echo.json").exists()
        assert list((tmp_path / "run" / "polygons").glob("*.csv"))
        base = pfd1.with_overrides(horizon=1, design="fixed-gain")
        grid_res = run_input_grid(base, np.array([0.0]), ["fixed-gain"])
        emit_results(grid_res, tmp_path / "grid")
        assert (tmp_path / "grid" / "grid.csv").exists()
        with pytest.raises(TypeError):
            emit_results(object(), tmp_path)

    def test_scenario_echo(self, pfd1, tmp_path):
        rec = run_scenario(pfd1.with_overrides(horizon=2))
        write_scenario_echo(pfd1, rec.summary(), tmp_path / "scenario-echo.json")
        doc = json.loads((tmp_path / "scenario-echo.json").read_text())
        assert "scenario" in doc and "summary" in doc
        assert doc["scenario"]["plant"]["A"] == pfd1.raw["plant"]["A"]
