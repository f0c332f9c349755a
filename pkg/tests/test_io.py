from __future__ import annotations

import json

import numpy as np
import pytest

from fracmanifold.errors import ValidationError
from fracmanifold.io import (
    as_real,
    dump_json,
    load_schema,
    load_system,
    read_points,
    system_from_dict,
    system_to_dict,
    validate,
    write_csv,
)
from fracmanifold.spectral import DeclaredBlock

SADDLE = {
    "alpha": 0.5,
    "A": [[-2.0, 0.0], [0.0, 2.0]],
    "f": [
        {"out": 0, "coeff": 1.0, "powers": [2, 0]},
        {"out": 1, "coeff": 1.0, "powers": [2, 0]},
        {"out": 1, "coeff": 1.0, "powers": [0, 2]},
    ],
}


# {{{ systems


def test_system_roundtrip():
    sys = system_from_dict(SADDLE)
    assert sys.alpha == 0.5 and sys.is_real
    assert np.allclose(sys.A, np.diag([-2.0, 2.0]))
    doc = system_to_dict(sys)
    assert doc["A"] == SADDLE["A"]
    # terms come back in canonical order
    assert sorted(doc["f"], key=str) == sorted(SADDLE["f"], key=str)
    assert system_from_dict(doc).f == sys.f


def test_complex_entries_and_blocks():
    doc = {
        "alpha": 0.7,
        "A": [[[1.0, 1.0], 1.0], [0.0, [1.0, 1.0]]],
        "f": [{"out": 0, "coeff": [0.0, 2.0], "powers": [1, 1]}],
        "jordan_blocks": [{"eigenvalue": [1.0, 1.0], "sizes": [2]}],
    }
    sys = system_from_dict(doc)
    assert sys.A[0, 0] == 1 + 1j
    assert sys.jordan_blocks == (DeclaredBlock(1 + 1j, (2,)),)
    assert system_from_dict(system_to_dict(sys)).jordan_blocks == sys.jordan_blocks


def test_repeated_terms_are_summed():
    doc = {**SADDLE, "f": SADDLE["f"] + [{"out": 0, "coeff": 2.0, "powers": [2, 0]}]}
    assert system_from_dict(doc).f.terms[0, (2, 0)] == 3.0


@pytest.mark.parametrize(
    "patch, where",
    [
        ({"alpha": 1.5}, "alpha"),
        ({"A": [[1.0, 0.0], [0.0]]}, "A"),
        ({"f": [{"out": 0, "coeff": 1.0, "powers": [2]}]}, "f/0/powers"),
        ({"f": [{"out": 5, "coeff": 1.0, "powers": [2, 0]}]}, "f/0/out"),
        ({"f": [{"out": 0, "coeff": "x", "powers": [2, 0]}]}, "f/0/coeff"),
        ({"extra": 1}, "<root>"),
    ],
)
def test_invalid_system_names_field(patch, where):
    with pytest.raises(ValidationError, match=where):
        system_from_dict({**SADDLE, **patch})


def test_load_system_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"alpha": 0.5,\n  "A": [[1, 0], [0, 1]\n}')
    with pytest.raises(ValidationError, match="line 3, column 1"):
        load_system(bad)
    with pytest.raises(ValidationError, match="missing.json"):
        load_system(tmp_path / "missing.json")

    good = tmp_path / "good.json"
    good.write_text(json.dumps(SADDLE))
    assert load_system(good).d == 2


# }}}


# {{{ schemas and output


def test_schemas_load():
    for name in ("system", "ml", "spectrum", "diagnostics", "verify", "counterexample"):
        assert load_schema(name)["type"] == "object"
    validate(SADDLE, "system")


def test_dump_json_sorted(tmp_path):
    path = tmp_path / "out.json"
    text = dump_json({"b": 1, "a": [1.5, 2]}, path)
    assert path.read_text() == text
    assert text.index('"a"') < text.index('"b"')


def test_as_real():
    assert not np.iscomplexobj(as_real(np.array([1.0 + 1e-12j])))
    assert np.iscomplexobj(as_real(np.array([1.0 + 1e-3j])))
    x = np.array([1, 2])
    assert as_real(x) is x


def test_csv_roundtrip(tmp_path):
    path = tmp_path / "pts.csv"
    x = np.array([[0.1, -0.2], [1.0 / 3.0, 0.0]])
    write_csv(path, [("n", np.array([1, 2])), ("x", x)])
    lines = path.read_text().splitlines()
    assert lines[0] == "n,x_1,x_2"
    assert lines[2].startswith("2,0.3333333333333333,")
    assert np.array_equal(read_points(path, 2), x)


def test_csv_complex_columns(tmp_path):
    path = tmp_path / "c.csv"
    x = np.array([[0.1 + 0.5j], [0.2 - 0.1j]])
    write_csv(path, [("x", x)])
    assert path.read_text().splitlines()[0] == "x_1_re,x_1_im"
    assert np.array_equal(read_points(path, 1), x)


def test_read_plain_points(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("a,b\n0.5,1\n")
    assert np.array_equal(read_points(path, 2), [[0.5, 1.0]])
    with pytest.raises(ValidationError):
        read_points(path, 3)
    path.write_text("a,b\n0.5,zz\n")
    with pytest.raises(ValidationError, match="column 'b'"):
        read_points(path, 2)
    path.write_text("")
    with pytest.raises(ValidationError):
        read_points(path, 2)


# }}}
