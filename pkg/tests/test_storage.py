import json

import numpy as np
import pytest

from phturnpike.core.errors import InputFormatError
from phturnpike.core.storage import dump_json, output_session, read_json
from phturnpike.schemas.report import ViolationModel


def test_numpy_values_are_serialised():
    payload = {
        "eigenvalues": np.array([1.0 + 2.0j, -0.5 + 0.0j]),
        "unstable": np.array([], dtype=complex),
        "flag": np.bool_(True),
        "stats": {0.1: np.float64(2.5)},
    }
    decoded = json.loads(dump_json(payload))
    assert decoded["eigenvalues"] == [[1.0, 2.0], [-0.5, 0.0]]
    assert decoded["unstable"] == []
    assert decoded["flag"] is True
    assert decoded["stats"] == {"0.1": 2.5}


def test_pydantic_models_use_their_own_dump():
    decoded = json.loads(dump_json(ViolationModel(condition="R symmetric", residual=0.5)))
    assert decoded == {"condition": "R symmetric", "residual": 0.5}


def test_writer_records_every_file(tmp_path):
    with output_session(tmp_path / "run") as writer:
        writer.write_json("a.json", {"x": np.arange(3)})
        writer.write_csv("b.csv", ["t", "x"], [[0.0, 1.0], [0.5, 2.0]])
    assert [p.name for p in writer.written] == ["a.json", "b.csv"]
    assert read_json(tmp_path / "run" / "a.json") == {"x": [0, 1, 2]}
    assert (tmp_path / "run" / "b.csv").read_text().splitlines()[0] == "t,x"


def test_syntax_errors_carry_the_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "J": [1,\n}')
    with pytest.raises(InputFormatError) as info:
        read_json(path)
    assert info.value.details["line"] == 3
