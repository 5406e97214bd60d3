import json
import os

import numpy as np
import pytest

from gaugelab.cli import main
from gaugelab.config import ExperimentConfig, merge_dicts
from gaugelab.errors import ConfigInvalid
from gaugelab.io import load_amplitudes, load_columns, load_config, save_amplitudes, save_columns
from gaugelab.packet import KGrid, PhysicalConstants, gaussian_amplitude, normalize
from gaugelab.validator import config_error, validate

SMALL = {
    "grid": {"points": 256, "spacing": 0.015625, "offset": 5.0},
    "packet": {"k0": [5.0], "delta_k": 0.05},
}


def write_config(directory, data, name="config.json"):
    path = os.path.join(directory, name)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(data, f)
    return path


def read_json(path):
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


class TestConfig:
    def test_round_trip(self):
        config = ExperimentConfig.from_dict(dict(SMALL, kind="evolve-kg"))
        assert ExperimentConfig.from_dict(config.to_dict()) == config
        assert config.grid.points == 256
        assert config.solver.steps == 1000

    def test_unknown_field_has_path(self):
        with pytest.raises(ConfigInvalid) as info:
            ExperimentConfig.from_dict({"grid": {"pionts": 64}})
        assert info.value.field == "grid.pionts"
        assert info.value.to_record()["error"] == "config-invalid"

    def test_unknown_kind(self):
        with pytest.raises(ConfigInvalid):
            ExperimentConfig.from_dict({"kind": "teleport"})

    def test_schema_version(self):
        with pytest.raises(ConfigInvalid):
            ExperimentConfig.from_dict({"schema_version": 2})

    def test_merge_dicts(self):
        merged = merge_dicts({"a": {"b": 1, "c": 2}, "d": 3}, {"a": {"c": 4}, "e": 5})
        assert merged == {"a": {"b": 1, "c": 4}, "d": 3, "e": 5}

    def test_include(self, tmp_path):
        write_config(tmp_path, {"grid": {"points": 256, "spacing": 0.5}, "kind": "born-trials"}, "base.json")
        path = write_config(tmp_path, {"include": "base.json", "grid": {"spacing": 0.25}})
        config = load_config(path)
        assert (config.grid.points, config.grid.spacing) == (256, 0.25)
        assert config.kind == "born-trials"

    def test_circular_include(self, tmp_path):
        write_config(tmp_path, {"include": "b.json"}, "a.json")
        write_config(tmp_path, {"include": "a.json"}, "b.json")
        with pytest.raises(ConfigInvalid):
            load_config(os.path.join(tmp_path, "a.json"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_config(os.path.join(tmp_path, "absent.json"))


class TestValidator:
    def test_defaults_are_clean(self):
        assert validate(ExperimentConfig()) == []

    def test_grid_too_narrow(self):
        config = ExperimentConfig.from_dict({"packet": {"delta_k": 1.0}})
        assert any(d.startswith("grid-too-narrow:") for d in validate(config))

    def test_unstable_step(self):
        config = ExperimentConfig.from_dict(dict(SMALL, kind="evolve-kg", solver={"dt": 10.0}))
        assert any(d.startswith("unstable-step:") for d in validate(config))

    def test_too_relativistic(self):
        config = ExperimentConfig.from_dict(dict(SMALL, kind="compare-low-energy"))
        assert any(d.startswith("too-relativistic:") for d in validate(config))

    def test_solver_and_measurement_ranges(self):
        config = ExperimentConfig.from_dict({"solver": {"record_every": 0}, "measurement": {"trials": 0}})
        diagnostics = validate(config)
        assert "config-invalid: solver.record_every: must be >= 1" in diagnostics
        assert "config-invalid: measurement.trials: must be >= 1" in diagnostics

    def test_partition_gap(self):
        config = ExperimentConfig.from_dict({"kind": "born-trials", "measurement": {"edges": [0.0, 1.0]}})
        assert any(d.startswith("partition-gap:") for d in validate(config))

    def test_config_error(self):
        config = ExperimentConfig.from_dict({"measurement": {"seed": -1}})
        error = config_error(validate(config))
        assert isinstance(error, ConfigInvalid)
        assert error.field == "measurement.seed"
        assert config_error(validate(ExperimentConfig())) is None


class TestColumns:
    def test_save_and_load(self, tmp_path):
        path = os.path.join(tmp_path, "series.tsv")
        save_columns({"t": [0.0, 0.5], "x1": [1.0 / 3.0, -2.0]}, path)
        columns = load_columns(path)
        assert list(columns) == ["t", "x1"]
        assert columns["x1"][0] == 1.0 / 3.0

    def test_lengths_must_agree(self, tmp_path):
        with pytest.raises(ValueError):
            save_columns({"t": [0.0], "x1": [1.0, 2.0]}, os.path.join(tmp_path, "bad.tsv"))

    def test_amplitudes(self, tmp_path):
        grid = KGrid(1, 64, 0.125, offset=2.0)
        packet = normalize(gaussian_amplitude(grid, 2.0, 0.2), grid).translated(3.0)
        path = os.path.join(tmp_path, "amplitudes.tsv")
        save_amplitudes(packet, path)
        loaded = load_amplitudes(path, grid, PhysicalConstants())
        assert np.array_equal(loaded.alpha, packet.alpha)

    def test_amplitudes_need_matching_grid(self, tmp_path):
        grid = KGrid(1, 64, 0.125, offset=2.0)
        path = os.path.join(tmp_path, "amplitudes.tsv")
        save_amplitudes(normalize(gaussian_amplitude(grid, 2.0, 0.2), grid), path)
        with pytest.raises(ValueError):
            load_amplitudes(path, KGrid(1, 64, 0.125), PhysicalConstants())


class TestCli:
    def test_packet_info(self, tmp_path):
        out = os.path.join(tmp_path, "out")
        assert main(["--config", write_config(tmp_path, SMALL), "--out", out]) == 0
        record = read_json(os.path.join(out, "result.json"))
        assert record["schema_version"] == 1
        assert record["kind"] == "packet-info"
        info = record["results"]["packet-info"]
        assert info["charge"] == pytest.approx(1.0, abs=1e-8)
        assert info["P"][1] == pytest.approx(5.0, abs=1e-6)
        assert info["momentum_condition"] < 1e-2
        for name in ("amplitudes.tsv", "report.md"):
            assert os.path.exists(os.path.join(out, name))

    def test_deterministic_output(self, tmp_path):
        path = write_config(tmp_path, dict(SMALL, kind="born-trials", measurement={"trials": 3000, "bins": 4}))
        outputs = []
        for name in ("first", "second"):
            out = os.path.join(tmp_path, name)
            assert main(["--config", path, "--out", out]) == 0
            with open(os.path.join(out, "result.json"), 'rb') as f:
                outputs.append(f.read())
        assert outputs[0] == outputs[1]
        record = json.loads(outputs[0])
        assert record["results"]["born-trials"]["status"] in ("pass", "flagged")

    def test_seed_override(self, tmp_path):
        path = write_config(tmp_path, dict(SMALL, kind="born-trials", measurement={"trials": 500, "bins": 4}))
        out = os.path.join(tmp_path, "out")
        assert main(["--config", path, "--out", out, "--seed", "17"]) == 0
        record = read_json(os.path.join(out, "result.json"))
        assert record["config"]["measurement"]["seed"] == 17
        assert record["results"]["born-trials"]["attempts"][0]["seed"] == 17

    def test_evolve_kg_writes_series_and_plots(self, tmp_path):
        path = write_config(tmp_path, dict(SMALL, solver={"steps": 20, "record_every": 5}))
        out = os.path.join(tmp_path, "out")
        assert main(["--config", path, "--kind", "evolve-kg", "--out", out, "--emit-plots"]) == 0
        columns = load_columns(os.path.join(out, "evolve_kg.tsv"))
        assert len(columns["t"]) == 5
        assert np.max(np.abs(columns["charge_drift"])) < 1e-10
        with open(os.path.join(out, "plot_evolve_kg.py"), 'r', encoding='utf-8') as f:
            assert "matplotlib" in f.read()

    def test_error_record(self, tmp_path):
        path = write_config(tmp_path, {"packet": {"delta_k": 1.0}})
        out = os.path.join(tmp_path, "out")
        assert main(["--config", path, "--out", out]) == 10
        record = read_json(os.path.join(out, "error.json"))
        assert record["error"] == "grid-too-narrow"

    def test_config_error(self, tmp_path):
        path = write_config(tmp_path, {"grid": {"pionts": 64}})
        out = os.path.join(tmp_path, "out")
        assert main(["--config", path, "--out", out]) == 2
        assert read_json(os.path.join(out, "error.json"))["field"] == "grid.pionts"

    def test_missing_config(self, tmp_path):
        assert main(["--config", os.path.join(tmp_path, "absent.json"), "--out", str(tmp_path)]) == 2

    def test_validate_only(self, tmp_path):
        good = write_config(tmp_path, SMALL, "good.json")
        bad = write_config(tmp_path, dict(SMALL, kind="compare-low-energy"), "bad.json")
        assert main(["--config", good, "--validate-only"]) == 0
        assert main(["--config", bad, "--validate-only"]) == 2
        assert not os.path.exists(os.path.join(tmp_path, "result.json"))

    @pytest.mark.parametrize("measurement, field", [
        ({"trials": 0}, "measurement.trials"),
        ({"seed": -1}, "measurement.seed"),
    ])
    def test_invalid_field_stops_run(self, tmp_path, measurement, field):
        path = write_config(tmp_path, dict(SMALL, kind="born-trials", measurement=measurement))
        out = os.path.join(tmp_path, "out")
        assert main(["--config", path, "--out", out]) == 2
        record = read_json(os.path.join(out, "error.json"))
        assert record["error"] == "config-invalid"
        assert record["field"] == field
        assert not os.path.exists(os.path.join(out, "result.json"))

    def test_negative_seed_override(self, tmp_path):
        path = write_config(tmp_path, dict(SMALL, kind="born-trials", measurement={"trials": 500, "bins": 4}))
        out = os.path.join(tmp_path, "out")
        assert main(["--config", path, "--out", out, "--seed", "-1"]) == 2
        assert read_json(os.path.join(out, "error.json"))["field"] == "measurement.seed"

    def test_amplitudes_on_wrong_grid(self, tmp_path):
        other = KGrid(1, 256, 0.015625)
        amplitudes = os.path.join(tmp_path, "amplitudes.tsv")
        save_amplitudes(normalize(gaussian_amplitude(other, 0.0, 0.05), other), amplitudes)
        path = write_config(tmp_path, {"grid": SMALL["grid"],
                                       "packet": {"shape": "file", "amplitudes_file": amplitudes}})
        out = os.path.join(tmp_path, "out")
        assert main(["--config", path, "--out", out]) == 2
        assert read_json(os.path.join(out, "error.json"))["field"] == "packet.amplitudes_file"

    def test_result_is_strict_json(self, tmp_path):
        path = write_config(tmp_path, dict(SMALL, kind="born-trials", measurement={"trials": 500, "bins": 1}))
        out = os.path.join(tmp_path, "out")
        assert main(["--config", path, "--out", out]) == 0

        def reject(token):
            raise ValueError(f"non-standard JSON constant {token}")

        with open(os.path.join(out, "result.json"), 'r', encoding='utf-8') as f:
            record = json.loads(f.read(), parse_constant=reject)
        # a single bin leaves the chi-squared test without degrees of freedom
        assert record["results"]["born-trials"]["attempts"][0]["threshold"] is None
