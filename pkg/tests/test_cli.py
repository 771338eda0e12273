# /tests/test_cli.py

import json

import pytest

from bitflip import ConfigError, ExperimentPipeline, Model, main, parse_config, read_csv, run_command


def write_config(tmp_path, document, name="experiment.json"):
    path = tmp_path / name
    path.write_text(json.dumps(document), encoding="utf-8")
    return str(path)


SIMULATE = {"command": "simulate", "model": "bf", "dist": {"family": "geometric", "p": 0.3},
            "seed": 42, "replicas": 50, "horizon": 10**4}


# configuration parsing

def test_parse_simulate():
    exp = parse_config(json.dumps(SIMULATE))
    assert exp.command == "simulate"
    assert exp.model is Model.BF
    assert exp.dist.p == 0.3
    assert exp.replicas == 50 and exp.horizon == 10**4
    assert exp.default_output() == "simulate.csv"


def test_command_override():
    exp = parse_config(json.dumps(SIMULATE), command="classify")
    assert exp.command == "classify"
    assert exp.default_output() == "classify.json"


@pytest.mark.parametrize("change, field", [
    ({"dist": {"family": "geometric", "p": 1.5}}, "dist.p"),
    ({"seed": -1}, "seed"),
    ({"seed": "42"}, "seed"),
    ({"replicas": 0}, "replicas"),
    ({"model": "xy"}, "model"),
    ({"command": "plot"}, "command"),
    ({"colour": "red"}, "colour"),
    ({"r_grid": [0.2, 1.5]}, "r_grid[1]"),
])
def test_parse_errors_name_field(change, field):
    document = dict(SIMULATE, **change)
    with pytest.raises(ConfigError) as err:
        parse_config(json.dumps(document))
    assert err.value.field == field


def test_seed_is_required():
    document = dict(SIMULATE)
    del document["seed"]
    with pytest.raises(ConfigError) as err:
        parse_config(json.dumps(document))
    assert err.value.field == "seed"


def test_command_needs_its_fields():
    with pytest.raises(ConfigError) as err:
        parse_config(json.dumps({"command": "clt", "seed": 1,
                                 "dist": {"family": "geometric", "p": 0.3}}))
    assert err.value.field == "t"


def test_invalid_json():
    with pytest.raises(ConfigError) as err:
        parse_config("{not json")
    assert err.value.field == "<document>"


def test_resolved_leaves_out_output_and_workers():
    exp = parse_config(json.dumps(dict(SIMULATE, output="x.csv", workers=4)))
    resolved = exp.resolved()
    assert "output" not in resolved and "workers" not in resolved
    assert resolved["dist"] == {"family": "geometric", "p": 0.3}


# commands

def test_main_config_error_exit_code(tmp_path, capsys):
    path = write_config(tmp_path, dict(SIMULATE, dist={"family": "geometric", "p": 1.5}))
    assert main([path]) == 2
    assert "dist.p" in capsys.readouterr().err


def test_main_missing_file(tmp_path):
    assert main([str(tmp_path / "missing.json")]) == 1


def test_runtime_failure_exit_code(tmp_path, capsys):
    # Growth fits are only defined for geometric laws.
    exp = parse_config(json.dumps({"command": "moments", "seed": 1, "m_grid": [1, 2],
                                   "dist": {"family": "stretched_exp", "alpha": 1.0,
                                            "gamma": 0.5}}))
    assert run_command(exp, output=str(tmp_path / "m.csv")) == 1
    assert "geometric" in capsys.readouterr().err


def test_moments_csv(tmp_path):
    path = write_config(tmp_path, {"command": "moments", "seed": 0, "p_grid": [0.1, 0.25, 0.4]})
    output = str(tmp_path / "moments.csv")
    assert main([path, "--output", output]) == 0
    columns, data = read_csv(output)
    assert columns == ["p", "r_lower", "r_upper"]
    assert data.shape == (3, 3)
    assert data[1, 1] == 0.5
    assert all(data[:, 1] < data[:, 2])


def test_classify_json(tmp_path):
    path = write_config(tmp_path, {"command": "classify", "seed": 0,
                                   "dist": {"family": "geometric", "p": 0.6}})
    output = tmp_path / "classify.json"
    assert main([path, "--output", str(output)]) == 0
    document = json.loads(output.read_text(encoding="utf-8"))
    assert document["result"] == {"bf": "Transient", "db": "Recurrent"}
    assert document["config"]["seed"] == 0
    assert "bitflip" in document


def test_simulate_is_byte_identical(tmp_path):
    path = write_config(tmp_path, SIMULATE)
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main([path, "--output", str(first)]) == 0
    assert main([path, "--output", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()

    columns, data = read_csv(str(first))
    assert columns == ["replica_id", "tau", "censored", "m0", "peak_m"]
    assert data.shape == (50, 5)
    assert (tmp_path / "a.csv.summary.json").exists()


def test_simulate_independent_of_workers(tmp_path):
    serial = write_config(tmp_path, SIMULATE, "serial.json")
    parallel = write_config(tmp_path, dict(SIMULATE, workers=2), "parallel.json")
    first, second = tmp_path / "serial.csv", tmp_path / "parallel.csv"
    assert main([serial, "--output", str(first)]) == 0
    assert main([parallel, "--output", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_snapshot_csv(tmp_path):
    path = write_config(tmp_path, {"command": "snapshot", "seed": 3, "model": "db",
                                   "dist": {"family": "geometric", "p": 0.3},
                                   "t": 100.0, "replicas": 20})
    output = str(tmp_path / "snap.csv")
    assert main([path, "--output", output]) == 0
    columns, data = read_csv(output)
    assert columns == ["replica_id", "n_active", "n_damaged", "max_active"]
    assert data.shape == (20, 4)


def test_analyze_pipeline():
    exp = parse_config(json.dumps({"command": "analyze", "seed": 0, "t": 100.0, "t_max": 1e4,
                                   "dist": {"family": "geometric", "p": 0.7}}))
    pipeline = ExperimentPipeline(exp).run()
    reports = pipeline.get("reports")
    assert set(reports) == {"expected_active", "variance_active", "ground_occupancy"}
    assert reports["expected_active"].value > 0


def test_moments_warns_on_skipped_exponents(caplog):
    exp = parse_config(json.dumps({"command": "moments", "seed": 0, "p_grid": [0.25],
                                   "dist": {"family": "geometric", "p": 0.25},
                                   "m_grid": [1, 2], "r_grid": [0.3, 0.6],
                                   "replicas": 50, "horizon": 1000}))
    pipeline = ExperimentPipeline(exp).run()
    assert set(pipeline.growth) == {0.3}
    assert "Skipping growth fit at r = 0.6" in caplog.text


def test_moments_growth_for_db():
    exp = parse_config(json.dumps({"command": "moments", "seed": 0, "model": "db",
                                   "dist": {"family": "geometric", "p": 0.25},
                                   "m_grid": [1, 2], "r_grid": [0.3],
                                   "replicas": 50, "horizon": 1000}))
    pipeline = ExperimentPipeline(exp).run()
    assert set(pipeline.growth[0.3].moments) == {1, 2}
