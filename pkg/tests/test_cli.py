"""Command-line runner: manifests, artifacts, determinism, exit codes."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from spinfridge import OracleResult, __version__
from spinfridge.cli import main


def write_manifest(path, **fields):
    body = {"schema_version": 1, **fields}
    path.write_text(json.dumps(body, indent=1), encoding="utf-8")
    return path


def read_rows(path):
    lines = path.read_text().splitlines()
    header = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    return header, body[0].split(","), [ln.split(",") for ln in body[1:]]


@pytest.fixture
def cool_manifest(tmp_path):
    return write_manifest(
        tmp_path / "cool.json",
        kind="cool",
        seed=5,
        out=str(tmp_path / "out"),
        config={"probe_sizes": [3, 2], "bath_beta_tilde": 0.2, "steps": 2},
    )


class TestManifestValidation:
    def test_invalid_json_reports_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{\n  broken\n}")
        assert main(["cool", "--manifest", str(bad)]) == 2
        err = capsys.readouterr().err
        assert "line 2" in err

    def test_wrong_schema_version(self, tmp_path, capsys):
        manifest = write_manifest(tmp_path / "m.json", kind="cool", config={})
        data = json.loads(manifest.read_text())
        data["schema_version"] = 99
        manifest.write_text(json.dumps(data))
        assert main(["cool", "--manifest", str(manifest)]) == 2
        assert "schema_version" in capsys.readouterr().err

    def test_unknown_kind(self, tmp_path):
        manifest = write_manifest(tmp_path / "m.json", kind="anneal",
                                  config={})
        assert main(["cool", "--manifest", str(manifest)]) == 2

    def test_kind_mismatch(self, cool_manifest):
        assert main(["sweep", "--manifest", str(cool_manifest)]) == 2

    def test_missing_manifest_file(self, tmp_path):
        assert main(["cool", "--manifest", str(tmp_path / "none.json")]) == 2

    def test_manifest_required_except_verify(self):
        assert main(["cool"]) == 2

    def test_unknown_config_field(self, tmp_path, capsys):
        manifest = write_manifest(
            tmp_path / "m.json", kind="cool", out=str(tmp_path),
            config={"probe_sizes": [2], "bath_beta_tilde": 0.2, "stepz": 1})
        assert main(["cool", "--manifest", str(manifest)]) == 2
        assert "stepz" in capsys.readouterr().err

    def test_bad_seed_rejected(self, tmp_path):
        manifest = write_manifest(tmp_path / "m.json", kind="cool", seed=-1,
                                  config={})
        assert main(["cool", "--manifest", str(manifest)]) == 2

    def test_physics_validation_maps_to_exit_2(self, tmp_path):
        manifest = write_manifest(
            tmp_path / "m.json", kind="cool", out=str(tmp_path),
            config={"probe_sizes": [2], "bath_beta_tilde": -0.5, "steps": 1})
        assert main(["cool", "--manifest", str(manifest)]) == 2


class TestCoolRuns:
    def test_artifacts_and_first_step_purity(self, cool_manifest, tmp_path):
        assert main(["cool", "--manifest", str(cool_manifest)]) == 0
        header, columns, rows = read_rows(tmp_path / "out" / "fig2a.csv")
        assert columns == ["N", "k", "eta_k"]
        assert header[0] == f"# spinfridge {__version__}"
        assert header[2] == "# seed=5"
        # rows sorted by N, k; first step of the ideal protocol is exact
        assert [(r[0], r[1]) for r in rows] == [
            ("2", "1"), ("2", "2"), ("3", "1"), ("3", "2")]
        for row in rows:
            if row[1] == "1":
                assert float(row[2]) == pytest.approx(1.0, abs=1e-9)

        _, dist_columns, dist_rows = read_rows(tmp_path / "out" / "fig3.csv")
        assert dist_columns == ["N_or_T", "k", "trace_distance"]
        # includes the k=0 baseline and contracts toward the target
        per_n = {}
        for value, k, d in dist_rows:
            per_n.setdefault(value, []).append(float(d))
        for distances in per_n.values():
            assert distances == sorted(distances, reverse=True)

    def test_byte_identical_reruns(self, cool_manifest, tmp_path):
        assert main(["cool", "--manifest", str(cool_manifest)]) == 0
        first = (tmp_path / "out" / "fig2a.csv").read_bytes()
        assert main(["cool", "--manifest", str(cool_manifest)]) == 0
        assert (tmp_path / "out" / "fig2a.csv").read_bytes() == first

    def test_out_flag_overrides_manifest(self, cool_manifest, tmp_path):
        other = tmp_path / "elsewhere"
        assert main(["cool", "--manifest", str(cool_manifest),
                     "--out", str(other)]) == 0
        assert (other / "fig2a.csv").exists()

    def test_temperature_axis(self, tmp_path):
        manifest = write_manifest(
            tmp_path / "m.json", kind="cool", out=str(tmp_path / "o"),
            config={"bath_beta_tildes": [0.5, 0.2], "probe_size": 2,
                    "steps": 1})
        assert main(["cool", "--manifest", str(manifest)]) == 0
        _, _, rows = read_rows(tmp_path / "o" / "fig2a.csv")
        assert [r[0] for r in rows] == [
            "2.00000000000e-01", "5.00000000000e-01"]

    def test_both_axes_rejected(self, tmp_path):
        manifest = write_manifest(
            tmp_path / "m.json", kind="cool", out=str(tmp_path),
            config={"probe_sizes": [2], "bath_beta_tildes": [0.2],
                    "steps": 1})
        assert main(["cool", "--manifest", str(manifest)]) == 2


class TestSweeps:
    def sweep_manifest(self, tmp_path, **config):
        base = {"probe_size": 2, "bath_beta_tilde": 0.2, "steps": 2}
        return write_manifest(tmp_path / "sweep.json", kind="sweep", seed=9,
                              out=str(tmp_path / "out"),
                              config={**base, **config})

    def test_dephasing_grid_sorted(self, tmp_path):
        manifest = self.sweep_manifest(tmp_path,
                                       dephasing_rates=[0.5, 0.0, 0.1])
        assert main(["sweep", "--manifest", str(manifest)]) == 0
        _, columns, rows = read_rows(tmp_path / "out" / "fig4.csv")
        assert columns == ["gamma", "k", "eta_k", "dS_total", "S_probe",
                           "trace_distance"]
        gammas = [float(r[0]) for r in rows]
        assert gammas == sorted(gammas)
        assert len(rows) == 6  # 3 grid points x 2 steps

    def test_parallel_execution_matches_serial(self, tmp_path):
        manifest = self.sweep_manifest(tmp_path,
                                       dephasing_rates=[0.0, 0.2])
        assert main(["sweep", "--manifest", str(manifest)]) == 0
        serial = (tmp_path / "out" / "fig4.csv").read_bytes()
        assert main(["sweep", "--manifest", str(manifest),
                     "--threads", "2"]) == 0
        assert (tmp_path / "out" / "fig4.csv").read_bytes() == serial

    def test_swap_strength_grid(self, tmp_path):
        manifest = self.sweep_manifest(tmp_path, swap_strengths=[20.0, 5.0])
        assert main(["sweep", "--manifest", str(manifest)]) == 0
        _, columns, rows = read_rows(tmp_path / "out" / "fig5.csv")
        assert columns[0] == "J_I"
        assert [r[0] for r in rows[:2]] == ["5.00000000000e+00"] * 2

    def test_grid_points_share_the_ideal_schedule(self, tmp_path):
        # The noise-free grid point of a replayed sweep must coincide with
        # a standalone optimized run of the same configuration.
        manifest = self.sweep_manifest(tmp_path, dephasing_rates=[0.3, 0.0])
        assert main(["sweep", "--manifest", str(manifest)]) == 0
        _, _, sweep_rows = read_rows(tmp_path / "out" / "fig4.csv")
        clean = [r for r in sweep_rows if float(r[0]) == 0.0]

        cool = write_manifest(
            tmp_path / "cool.json", kind="cool", seed=9,
            out=str(tmp_path / "cool_out"),
            config={"probe_sizes": [2], "bath_beta_tilde": 0.2, "steps": 2})
        assert main(["cool", "--manifest", str(cool)]) == 0
        _, _, cool_rows = read_rows(tmp_path / "cool_out" / "fig2a.csv")
        assert [r[2] for r in clean] == [r[2] for r in cool_rows]

    def test_fixed_policy_sweep_is_not_rescheduled(self, tmp_path):
        manifest = self.sweep_manifest(tmp_path, dephasing_rates=[0.0],
                                       waiting_policy="fixed",
                                       fixed_jtau=0.5)
        assert main(["sweep", "--manifest", str(manifest)]) == 0
        assert (tmp_path / "out" / "fig4.csv").exists()

    def test_empty_grid_is_a_config_error(self, tmp_path):
        manifest = self.sweep_manifest(tmp_path, dephasing_rates=[])
        assert main(["sweep", "--manifest", str(manifest)]) == 2

    def test_duplicate_grid_rejected(self, tmp_path):
        manifest = self.sweep_manifest(tmp_path,
                                       dephasing_rates=[0.1, 0.1])
        assert main(["sweep", "--manifest", str(manifest)]) == 2

    def test_threads_env_must_be_integer(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SPINFRIDGE_THREADS", "many")
        manifest = self.sweep_manifest(tmp_path, dephasing_rates=[0.0])
        assert main(["sweep", "--manifest", str(manifest)]) == 2


class TestThermometry:
    def test_columns_and_coverage_flag(self, tmp_path):
        manifest = write_manifest(
            tmp_path / "t.json", kind="thermometry", seed=3,
            out=str(tmp_path / "out"),
            config={"probe_size": 2, "bath_beta_tilde": 0.2, "steps": 3,
                    "shots_per_site": 400, "repetitions": 4})
        assert main(["thermometry", "--manifest", str(manifest)]) == 0
        _, columns, rows = read_rows(tmp_path / "out" / "thermometry.csv")
        assert columns == ["rep", "beta_tilde_est", "stderr", "error",
                           "covered_3sigma"]
        assert [r[0] for r in rows] == ["0", "1", "2", "3"]
        for row in rows:
            assert row[4] in ("0", "1")

    def test_seed_flag_changes_samples(self, tmp_path):
        manifest = write_manifest(
            tmp_path / "t.json", kind="thermometry", seed=3,
            out=str(tmp_path / "out"),
            config={"probe_size": 1, "bath_beta_tilde": 0.3, "steps": 2,
                    "shots_per_site": 50, "repetitions": 1})
        assert main(["thermometry", "--manifest", str(manifest)]) == 0
        first = (tmp_path / "out" / "thermometry.csv").read_text()
        assert main(["thermometry", "--manifest", str(manifest),
                     "--seed", "77"]) == 0
        second = (tmp_path / "out" / "thermometry.csv").read_text()
        assert first != second
        assert "# seed=77" in second


class TestNvCoupling:
    def manifest(self, tmp_path):
        return write_manifest(
            tmp_path / "nv.json", kind="nv-coupling",
            out=str(tmp_path / "out"),
            config={
                "yield_chain_length": 6,
                "pairs": [{
                    "position1_nm": [0, 0, 0],
                    "position2_nm": [25.0, 0, 0],
                    "z_axis1": [0, 0, 1],
                    "z_axis2": [0, 0, 1],
                }],
            })

    def test_coupling_table_and_yield(self, tmp_path):
        assert main(["nv-coupling", "--manifest",
                     str(self.manifest(tmp_path))]) == 0
        _, columns, rows = read_rows(tmp_path / "out" / "nv_couplings.csv")
        assert columns[:3] == ["pair", "r_nm", "q"]
        # perpendicular collinear geometry at 25 nm: the field-axis coupling
        # is J0/r^3 = (2 pi) 52e6 / 25^3 rad/s = 3.328 kHz exactly.
        row = rows[0]
        assert float(row[2]) == pytest.approx(-1.0, abs=1e-12)
        ising_khz = float(row[columns.index("ising_khz")])
        assert ising_khz == pytest.approx(52e6 / 25.0 ** 3 / 1e3, rel=1e-12)

        summary = json.loads(
            (tmp_path / "out" / "nv_summary.json").read_text())
        chain = summary["result"]["chain_yield"]
        assert chain == {"length": 6, "fraction": "3/128",
                         "decimal": "0.0234375"}

    def test_named_axes_accepted(self, tmp_path):
        manifest = write_manifest(
            tmp_path / "nv.json", kind="nv-coupling",
            out=str(tmp_path / "out"),
            config={"pairs": [{
                "position1_nm": [0, 0, 0], "position2_nm": [0, 0, 25.0],
                "z_axis1": "111", "z_axis2": "111"}]})
        assert main(["nv-coupling", "--manifest", str(manifest)]) == 0
        _, columns, rows = read_rows(tmp_path / "out" / "nv_couplings.csv")
        # the magic-angle geometry: q = 0
        assert abs(float(rows[0][2])) < 1e-12

    def test_unknown_axis_name_rejected(self, tmp_path, capsys):
        manifest = write_manifest(
            tmp_path / "nv.json", kind="nv-coupling", out=str(tmp_path),
            config={"pairs": [{
                "position1_nm": [0, 0, 0], "position2_nm": [0, 0, 25.0],
                "z_axis1": "groundhog", "z_axis2": "111"}]})
        assert main(["nv-coupling", "--manifest", str(manifest)]) == 2
        assert "groundhog" in capsys.readouterr().err

    def test_coincident_pair_rejected(self, tmp_path):
        manifest = write_manifest(
            tmp_path / "nv.json", kind="nv-coupling", out=str(tmp_path),
            config={"pairs": [{
                "position1_nm": [1, 2, 3], "position2_nm": [1, 2, 3],
                "z_axis1": "111", "z_axis2": "111"}]})
        assert main(["nv-coupling", "--manifest", str(manifest)]) == 2


class TestVerify:
    def canned(self, passed: bool):
        return [OracleResult("canned", passed, 5, 0.01, None)]

    def test_exit_zero_when_oracles_pass(self, tmp_path, monkeypatch):
        import spinfridge.cli as cli
        monkeypatch.setattr(cli, "run_all_oracles",
                            lambda seed: self.canned(True))
        assert main(["verify", "--out", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "oracle_verdicts.json").read_text())
        assert doc["result"][0]["passed"] is True
        assert doc["meta"]["seed"] == 20260814

    def test_exit_one_when_an_oracle_fails(self, tmp_path, monkeypatch):
        import spinfridge.cli as cli
        monkeypatch.setattr(cli, "run_all_oracles",
                            lambda seed: self.canned(False))
        assert main(["verify", "--out", str(tmp_path)]) == 1

    def test_seed_flag_reaches_the_oracles(self, tmp_path, monkeypatch):
        import spinfridge.cli as cli
        seen = {}

        def spy(seed):
            seen["seed"] = seed
            return self.canned(True)

        monkeypatch.setattr(cli, "run_all_oracles", spy)
        assert main(["verify", "--out", str(tmp_path), "--seed", "123"]) == 0
        assert seen["seed"] == 123
