"""Tests for exporters."""

import json

import pandas as pd
import pytest

from chinese_voting.core.errors import MalformedRecord
from chinese_voting.export.base import JsonExporter, atomic_write, dumps_json
from chinese_voting.export.params import ParamsExporter, ParamsFile, format_float, parse_params
from chinese_voting.export.tables import TableExporter
from chinese_voting.models.base import SelectionParams, VotingParams


@pytest.fixture
def params_file():
    """Parameters with awkward item ids and non-terminating floats."""
    voting = VotingParams(
        lam=2.0 / 3.0,
        mu=-1e-17,
        nu={"what is a p-value": 0.1, "b": -0.3},
        quality={("what is a p-value", 0): 1.0 / 7.0, ("what is a p-value", 1): -2.5,
                 ("b", 0): 0.0},
    )
    return ParamsFile(voting=voting, selection=SelectionParams(tau=1.25, alpha=0.5),
                      item_order=["what is a p-value", "b"])


def test_format_float_round_trips():
    """Test that formatted floats parse back to the same value."""
    for value in (0.1, 1.0 / 3.0, -1e-300, 12345.678):
        assert float(format_float(value)) == value


def test_params_layout(params_file):
    """Test the order of entries."""
    lines = ParamsExporter().render(params_file).decode("utf-8").splitlines()

    assert [line.split(" ")[0] for line in lines] == [
        "lambda", "mu", "sigma2", "tau", "alpha", "nu", "nu", "q", "q", "q",
    ]
    assert lines[5] == "nu what is a p-value 0.1"
    assert lines[-1] == "q b 0 0.0"


def test_params_parse_back(params_file):
    """Test reading a written parameter file."""
    parsed = parse_params(ParamsExporter().render(params_file).decode("utf-8"))

    assert parsed.voting.lam == params_file.voting.lam
    assert parsed.voting.mu == params_file.voting.mu
    assert parsed.voting.nu == params_file.voting.nu
    assert parsed.voting.quality == params_file.voting.quality
    assert parsed.selection.tau == 1.25
    assert parsed.item_order == ["what is a p-value", "b"]


def test_params_without_selection():
    """Test a file without tau."""
    text = ParamsExporter().render(ParamsFile(voting=VotingParams())).decode("utf-8")

    parsed = parse_params(text)

    assert parsed.selection is None
    assert "tau" not in text


def test_parse_params_errors():
    """Test malformed parameter files."""
    with pytest.raises(MalformedRecord):
        parse_params("lambda 1.0\nmu 0.0\nnu lonely\n")
    with pytest.raises(MalformedRecord):
        parse_params("lambda one\nmu 0.0\n")
    with pytest.raises(MalformedRecord):
        parse_params("mu 0.0\n")


def test_atomic_write(tmp_path):
    """Test writing into a new directory without leaving temporary files."""
    path = atomic_write(tmp_path / "out" / "data.bin", b"abc")

    assert path.read_bytes() == b"abc"
    assert [p.name for p in path.parent.iterdir()] == ["data.bin"]


def test_table_exporter_bytes():
    """Test the CSV float format and line ends."""
    frame = pd.DataFrame({"a": [1, 2], "x": [0.5, 1.0 / 3.0]})

    assert TableExporter().render(frame) == b"a,x\n1,0.5\n2,0.3333333333\n"


def test_json_exporter(tmp_path):
    """Test sorted, newline-terminated JSON."""
    data = dumps_json({"b": 1, "a": [1.5]})

    assert data.endswith(b"\n")
    assert list(json.loads(data)) == ["a", "b"]

    path = JsonExporter().write({"x": 1}, tmp_path / "x.json")
    assert json.loads(path.read_text()) == {"x": 1}
