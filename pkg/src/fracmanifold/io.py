"""Reading system files and writing CSV/JSON results.

System files are JSON documents validated against ``schemas/system.schema.json``.
Complex numbers are written as ``[re, im]`` pairs; inputs may also use plain
numbers for real entries.
"""

from __future__ import annotations

import csv
import json
import logging
from functools import cache
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import jsonschema
import numpy as np

from fracmanifold.errors import ValidationError
from fracmanifold.polynomial import PolynomialMap
from fracmanifold.spectral import DeclaredBlock, FractionalSystem

logger = logging.getLogger(__name__)

#: imaginary parts below this (relative) are dropped when writing real data
REAL_TOL = 1.0e-8


# {{{ schemas


@cache
def load_schema(name: str) -> dict[str, Any]:
    """Load one of the JSON schemas shipped with the package."""
    text = resources.files("fracmanifold").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(document: Any, name: str) -> None:
    """Validate ``document`` against schema ``name``.

    :raises ValidationError: naming the offending field.
    """
    try:
        jsonschema.validate(document, load_schema(name))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ValidationError(f"{where}: {exc.message}") from None


# }}}


# {{{ systems


def _complex(value: Any) -> complex:
    if isinstance(value, list):
        return complex(value[0], value[1])
    return complex(value)


def encode_complex(value: complex) -> list[float]:
    value = complex(value)
    return [float(value.real), float(value.imag)]


def system_from_dict(doc: dict[str, Any]) -> FractionalSystem:
    """Build a system from a parsed system document."""
    validate(doc, "system")

    rows = doc["A"]
    d = len(rows)
    if any(len(row) != d for row in rows):
        raise ValidationError(f"A: expected a {d}x{d} matrix")
    A = np.array([[_complex(v) for v in row] for row in rows])
    if np.all(A.imag == 0):
        A = A.real

    terms: dict[tuple[int, tuple[int, ...]], complex] = {}
    for i, term in enumerate(doc.get("f", [])):
        powers = tuple(term["powers"])
        if len(powers) != d:
            raise ValidationError(f"f/{i}/powers: expected {d} exponents, got {len(powers)}")
        if term["out"] >= d:
            raise ValidationError(f"f/{i}/out: index {term['out']} out of range for d = {d}")
        key = (term["out"], powers)
        terms[key] = terms.get(key, 0.0) + _complex(term["coeff"])

    blocks = None
    if "jordan_blocks" in doc:
        blocks = tuple(
            DeclaredBlock(_complex(b["eigenvalue"]), tuple(b["sizes"]))
            for b in doc["jordan_blocks"]
        )

    return FractionalSystem(float(doc["alpha"]), A, PolynomialMap(d, d, terms), blocks)


def system_to_dict(sys: FractionalSystem) -> dict[str, Any]:
    def enc(v: complex) -> Any:
        v = complex(v)
        return v.real if v.imag == 0 else [v.real, v.imag]

    doc: dict[str, Any] = {
        "alpha": sys.alpha,
        "A": [[enc(v) for v in row] for row in sys.A],
        "f": sys.f.to_json(),
    }
    if sys.jordan_blocks is not None:
        doc["jordan_blocks"] = [
            {"eigenvalue": enc(b.eigenvalue), "sizes": list(b.sizes)} for b in sys.jordan_blocks
        ]
    return doc


def load_system(path: str | Path) -> FractionalSystem:
    """Read and validate a system file.

    :raises ValidationError: for unreadable files, malformed JSON (with the
        line and column) or invalid content.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"{path}: {exc.strerror}") from None

    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(
            f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None

    try:
        return system_from_dict(doc)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


# }}}


# {{{ output


def as_real(values: np.ndarray) -> np.ndarray:
    """Drop negligible imaginary parts, keep complex data otherwise."""
    values = np.asarray(values)
    if not np.iscomplexobj(values):
        return values
    scale = max(float(np.max(np.abs(values), initial=0.0)), 1.0)
    if np.all(np.abs(values.imag) <= REAL_TOL * scale):
        return values.real
    return values


def dump_json(document: Any, path: str | Path | None, *, schema: str | None = None) -> str:
    """Serialize ``document`` (validated against ``schema``) to ``path`` or return it."""
    if schema is not None:
        validate(document, schema)
    text = json.dumps(document, indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def _columns(name: str, values: np.ndarray) -> tuple[list[str], np.ndarray]:
    """Header names and real columns for an ``(n, k)`` block."""
    values = as_real(values)
    k = values.shape[1]
    if not np.iscomplexobj(values):
        return [f"{name}_{i + 1}" for i in range(k)], values
    names = []
    cols = []
    for i in range(k):
        names += [f"{name}_{i + 1}_re", f"{name}_{i + 1}_im"]
        cols += [values[:, i].real, values[:, i].imag]
    return names, np.column_stack(cols)


def _format(v: Any) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: str | Path, blocks: Sequence[tuple[str, np.ndarray]]) -> None:
    """Write named column blocks side by side.

    Each block is ``(name, array)`` with ``array`` of shape ``(n,)`` or
    ``(n, k)``. One-dimensional blocks become a single column ``name``;
    integer blocks are written as integers.
    """
    header: list[str] = []
    cols: list[np.ndarray] = []
    for name, values in blocks:
        values = np.asarray(values)
        if values.ndim == 1 and not np.iscomplexobj(as_real(values)):
            header.append(name)
            cols.append(values if values.dtype.kind in "iu" else as_real(values))
        else:
            names, data = _columns(name, values.reshape(values.shape[0], -1))
            header += names
            cols += list(data.T)

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in zip(*cols):
            writer.writerow([_format(v) for v in row])


def read_points(path: str | Path, d: int) -> np.ndarray:
    """Read points from a CSV file.

    Uses the columns ``x_1 .. x_d`` (or their ``_re``/``_im`` pairs) when
    present, as written by the ``manifold`` command; otherwise the file must
    have exactly ``d`` columns.
    """
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ValidationError(f"{path}: {exc.strerror}") from None
    if not rows:
        raise ValidationError(f"{path}: empty file")

    header = rows[0]
    body = rows[1:]

    def column(name: str) -> np.ndarray:
        j = header.index(name)
        try:
            return np.array([float(r[j]) for r in body])
        except (ValueError, IndexError) as exc:
            raise ValidationError(f"{path}: column {name!r}: {exc}") from None

    if "x_1" in header:
        return np.column_stack([column(f"x_{i + 1}") for i in range(d)])
    if "x_1_re" in header:
        return np.column_stack(
            [column(f"x_{i + 1}_re") + 1j * column(f"x_{i + 1}_im") for i in range(d)]
        )
    if len(header) != d:
        raise ValidationError(f"{path}: expected columns x_1..x_{d} or exactly {d} columns")
    return np.column_stack([column(name) for name in header])


# }}}
