"""Dataset persistence: CSV rows with a space-kind header, and a JSON form.

CSV layout::

    # metricquantiles-dataset v1
    # space: {"kind": "euclidean-lp", "dim": 2, "q": 2.0}
    # meta: {"family": "gaussian", "seed": 42}
    x0,x0_hex,x1,x1_hex
    0.5,0x1p-1,...

Every float column is written twice, as shortest-round-trip decimal for humans
and as a hexadecimal float literal for bit-exact re-reading; the reader trusts
the hex columns.  SPD matrices flatten to the row-major lower triangle.

The JSON form is ``{"space": descriptor, "meta": ..., "points": [{"kind":
..., "data": [...]}]}`` with the same flat-coordinate convention.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DatasetError
from .spaces import Space, space_from_descriptor

CSV_MAGIC = "# metricquantiles-dataset v1"


def point_to_json(space: Space, point) -> dict:
    """JSON object form {kind, data} of one point."""
    return {"kind": space.kind, "data": [float(v) for v in space.flatten(point)]}


def point_from_json(space: Space, obj: dict):
    """Parse the {kind, data} object form; the kind must match the space."""
    if obj.get("kind") != space.kind:
        raise DatasetError(
            f"point kind {obj.get('kind')!r} does not match space kind {space.kind!r}")
    return space.unflatten(np.asarray(obj["data"], dtype=float))


def _format_row(coords: np.ndarray) -> str:
    cells = []
    for value in coords:
        value = float(value)
        cells.append(repr(value))
        cells.append(value.hex())
    return ",".join(cells)


def write_dataset(path, space: Space, points, meta: dict | None = None) -> Path:
    """Write points as CSV; returns the path written."""
    path = Path(path)
    labels = space.coordinate_labels()
    header = ",".join(f"{lab},{lab}_hex" for lab in labels)
    lines = [CSV_MAGIC,
             "# space: " + json.dumps(space.descriptor(), sort_keys=True)]
    if meta is not None:
        lines.append("# meta: " + json.dumps(meta, sort_keys=True))
    lines.append(header)
    for p in points:
        lines.append(_format_row(space.flatten(p)))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_dataset(path, expected_kind: str | None = None):
    """Read a CSV dataset back as (space, points, meta).

    Raises
    ------
    DatasetError
        On malformed content (with line/column info) or when ``expected_kind``
        is given and does not match the stored space kind.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != CSV_MAGIC:
        raise DatasetError(f"missing dataset magic line {CSV_MAGIC!r}", line=1)
    if len(lines) < 2 or not lines[1].startswith("# space: "):
        raise DatasetError("missing '# space: ' header", line=2)
    try:
        space = space_from_descriptor(json.loads(lines[1][len("# space: "):]))
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise DatasetError(f"bad space descriptor: {exc}", line=2) from None
    meta = None
    row_start = 2
    if len(lines) > 2 and lines[2].startswith("# meta: "):
        try:
            meta = json.loads(lines[2][len("# meta: "):])
        except json.JSONDecodeError as exc:
            raise DatasetError(f"bad meta header: {exc}", line=3) from None
        row_start = 3
    if expected_kind is not None and space.kind != expected_kind:
        raise DatasetError(
            f"dataset holds {space.kind!r} points but the requested analysis "
            f"needs {expected_kind!r}")
    labels = space.coordinate_labels()
    expected_header = ",".join(f"{lab},{lab}_hex" for lab in labels)
    if row_start >= len(lines):
        raise DatasetError("missing column header row", line=row_start + 1)
    if lines[row_start].strip() != expected_header:
        raise DatasetError(
            f"unexpected column header; want {expected_header!r}", line=row_start + 1)
    points = []
    width = len(labels)
    for offset, line in enumerate(lines[row_start + 1:]):
        lineno = row_start + 2 + offset
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != 2 * width:
            raise DatasetError(
                f"expected {2 * width} cells, found {len(cells)}",
                line=lineno, column=len(cells))
        coords = np.empty(width)
        for k in range(width):
            hex_cell = cells[2 * k + 1]
            try:
                coords[k] = float.fromhex(hex_cell)
            except ValueError:
                raise DatasetError(
                    f"bad hexadecimal float {hex_cell!r}",
                    line=lineno, column=2 * k + 2) from None
        try:
            points.append(space.unflatten(coords))
        except ValueError as exc:
            raise DatasetError(f"invalid point: {exc}", line=lineno) from None
    return space, points, meta


def write_dataset_json(path, space: Space, points, meta: dict | None = None) -> Path:
    """Write points in the JSON object form."""
    path = Path(path)
    doc = {"format": "metricquantiles-dataset", "version": 1,
           "space": space.descriptor(),
           "meta": meta,
           "points": [point_to_json(space, p) for p in points]}
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    return path


def read_dataset_json(path, expected_kind: str | None = None):
    """Read the JSON object form back as (space, points, meta)."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"bad JSON dataset: {exc}", line=exc.lineno,
                           column=exc.colno) from None
    if doc.get("format") != "metricquantiles-dataset":
        raise DatasetError("not a metricquantiles dataset (missing format tag)")
    space = space_from_descriptor(doc["space"])
    if expected_kind is not None and space.kind != expected_kind:
        raise DatasetError(
            f"dataset holds {space.kind!r} points but the requested analysis "
            f"needs {expected_kind!r}")
    points = [point_from_json(space, obj) for obj in doc["points"]]
    return space, points, doc.get("meta")


def convert_dataset(src, dst) -> Path:
    """Convert between the CSV and JSON dataset forms by file extension."""
    src, dst = Path(src), Path(dst)
    if src.suffix == ".json":
        space, points, meta = read_dataset_json(src)
    else:
        space, points, meta = read_dataset(src)
    if dst.suffix == ".json":
        return write_dataset_json(dst, space, points, meta)
    return write_dataset(dst, space, points, meta)
