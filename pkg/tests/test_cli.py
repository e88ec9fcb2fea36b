"""Tests for the command-line interface."""

import json
import logging

import pytest

from chinese_voting.cli import RunConfig, resolve_config, run
from chinese_voting.core.errors import ConfigError
from chinese_voting.export.params import parse_params
from tests.helpers import make_log, vote, write

SIM_FLAGS = ["--items", "12", "--events", "20", "--tau", "1.0", "--lambda", "1.5",
             "--mu", "-1.0", "--nu-sd", "0.2", "--seed", "5"]


@pytest.fixture
def simulated(tmp_path):
    """A small simulated community written by the ``simulate`` command."""
    out = tmp_path / "sim"
    assert run(["simulate", "--output-dir", str(out), *SIM_FLAGS]) == 0
    return out


def test_resolve_defaults():
    """Test defaults and flag parsing."""
    config = resolve_config(["validate", "--input", "events.jsonl"])

    assert config == RunConfig(command="validate", input="events.jsonl")


def test_flags_override_config_file(tmp_path):
    """Test precedence of flags over the config file over defaults."""
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"alpha": 0.7, "horizon": 20, "input": "a.jsonl"}))

    config = resolve_config(["validate", "--config", str(path), "--alpha", "0.9"])

    assert config.alpha == 0.9
    assert config.horizon == 20
    assert config.input == "a.jsonl"
    assert config.refit_stride == 25


def test_unknown_config_key(tmp_path):
    """Test that a misspelled config key is rejected."""
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"aplha": 0.7}))

    with pytest.raises(ConfigError):
        resolve_config(["validate", "--input", "x", "--config", str(path)])


def test_config_value_of_wrong_type(tmp_path, capsys):
    """Test that a config value of the wrong JSON type is a configuration error."""
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"alpha": "half"}))

    with pytest.raises(ConfigError, match="alpha"):
        resolve_config(["validate", "--input", "x", "--config", str(path)])
    assert run(["validate", "--input", "x", "--config", str(path)]) == 1
    assert "alpha" in capsys.readouterr().err

    path.write_text(json.dumps({"horizon": 2.5, "ablation": "yes", "metadata": None,
                                "ridge": 1}))
    with pytest.raises(ConfigError, match="horizon"):
        resolve_config(["validate", "--input", "x", "--config", str(path)])


def test_int_accepted_for_float_option(tmp_path):
    """Test that an integer config value is accepted where a float is expected."""
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"ridge": 1, "metadata": None, "ablation": True}))

    config = resolve_config(["validate", "--input", "x", "--config", str(path)])

    assert config.ridge == 1
    assert config.ablation is True


def test_option_errors():
    """Test missing inputs and out-of-range values."""
    with pytest.raises(ConfigError):
        resolve_config(["fit", "--input", "x"])
    with pytest.raises(ConfigError):
        resolve_config(["validate"])
    with pytest.raises(ConfigError):
        resolve_config(["validate", "--input", "x", "--alpha", "0"])
    with pytest.raises(ConfigError):
        resolve_config(["validate", "--input", "x", "--knockout", "q,rho"])
    with pytest.raises(ConfigError):
        resolve_config(["nonsense"])


def test_validate_prints_summary(tmp_path, capsys):
    """Test the validate command on a good log."""
    path = tmp_path / "events.jsonl"
    path.write_bytes(make_log([write("p1", 1), vote("p1", 2, 0, 1, [0])]))

    assert run(["validate", "--input", str(path)]) == 0

    summary = json.loads(capsys.readouterr().out)
    assert summary["votes"] == 1
    assert summary["responses"] == 1


def test_validate_rejects_bad_log(tmp_path, capsys):
    """Test exit code 1 and a located message on a bad log."""
    path = tmp_path / "events.jsonl"
    path.write_bytes(make_log([write("p1", 1), vote("p1", 2, 3, 1, [0])]))

    assert run(["validate", "--input", str(path)]) == 1
    assert "p1" in capsys.readouterr().err


def test_missing_input_file(tmp_path):
    """Test exit code 1 for an unreadable input."""
    assert run(["validate", "--input", str(tmp_path / "absent.jsonl")]) == 1


def test_simulate_outputs(simulated):
    """Test the simulate outputs and the echoed configuration."""
    assert sorted(p.name for p in simulated.iterdir()) == [
        "events.jsonl", "ground_truth.txt", "run_config.json",
    ]
    truth = parse_params((simulated / "ground_truth.txt").read_text())
    assert truth.voting.lam == 1.5
    assert truth.selection.tau == 1.0
    assert len(truth.voting.nu) == 12

    echoed = json.loads((simulated / "run_config.json").read_text())
    assert echoed["seed"] == 5
    assert "threads" not in echoed
    assert "output_dir" not in echoed


def test_simulate_to_stdout(capsysbinary):
    """Test that simulate without an output directory streams the log."""
    assert run(["simulate", "--items", "2", "--events", "5", "--seed", "1"]) == 0

    lines = capsysbinary.readouterr().out.splitlines()
    assert len(lines) == 10
    assert json.loads(lines[0])["action"] == "write"


def test_simulate_is_reproducible(tmp_path, simulated):
    """Test identical bytes across runs and thread counts."""
    again = tmp_path / "again"
    assert run(["simulate", "--output-dir", str(again), "--threads", "4", *SIM_FLAGS]) == 0

    for name in ("events.jsonl", "ground_truth.txt", "run_config.json"):
        assert (again / name).read_bytes() == (simulated / name).read_bytes()


def test_fit_then_quality_inputs(tmp_path, simulated):
    """Test fitting a simulated log."""
    out = tmp_path / "fit"

    assert run(["fit", "--input", str(simulated / "events.jsonl"), "--output-dir", str(out)]) == 0

    params = parse_params((out / "params.txt").read_text())
    assert len(params.voting.nu) == 12
    assert params.selection is not None
    summary = json.loads((out / "fit_summary.json").read_text())
    assert summary["voting"]["converged"] is True


def test_fit_is_reproducible(tmp_path, simulated):
    """Test that two fits of the same log write identical parameter files."""
    events = str(simulated / "events.jsonl")
    assert run(["fit", "--input", events, "--output-dir", str(tmp_path / "a")]) == 0
    assert run(["fit", "--input", events, "--output-dir", str(tmp_path / "b"),
                "--threads", "3"]) == 0

    assert (tmp_path / "a" / "params.txt").read_bytes() == (
        tmp_path / "b" / "params.txt"
    ).read_bytes()


def test_coeffs_with_embedding(tmp_path, simulated):
    """Test the coefficient table and the embedding table."""
    out = tmp_path / "coeffs"

    code = run(["coeffs", "--input", str(simulated / "events.jsonl"), "--output-dir", str(out),
                "--refit-stride", "40", "--emit-embedding", "--community-id", "sim"])

    assert code == 0
    header, row = (out / "coefficients.csv").read_text().splitlines()
    assert header == "community_id,group_tag,trendiness,conformity,n"
    assert row.startswith("sim,")
    assert (out / "embedding.csv").read_text().startswith(
        "community_id,group_tag,trendiness,conformity\n"
    )


def test_eval_command(tmp_path, simulated):
    """Test the evaluation tables."""
    out = tmp_path / "eval"

    code = run(["eval", "--input", str(simulated / "events.jsonl"), "--output-dir", str(out),
                "--horizon", "5", "--knockout", "nu"])

    assert code == 0
    summary = (out / "eval_summary.csv").read_text().splitlines()
    assert len(summary) == 3
    assert summary[1].startswith("cvp-nu,")
    assert summary[2].startswith("crp,")


def test_resolved_configuration_logged_by_default(tmp_path, caplog):
    """Test that the resolved options reach the log at the default verbosity."""
    path = tmp_path / "events.jsonl"
    path.write_bytes(make_log([write("p1", 1), vote("p1", 2, 0, 1, [0])]))

    assert run(["validate", "--input", str(path), "--alpha", "0.7"]) == 0

    messages = [r.getMessage() for r in caplog.records if r.levelno >= logging.WARNING]
    resolved = [m for m in messages if m.startswith("Resolved configuration: ")]
    assert len(resolved) == 1
    assert json.loads(resolved[0].split(": ", 1)[1])["alpha"] == 0.7
