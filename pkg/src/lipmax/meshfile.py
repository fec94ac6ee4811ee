"""ASCII ``lipmax-mesh 1`` reader/writer and deterministic report serialization.

Format::

    lipmax-mesh 1
    vertices N
    x y z            (N lines)
    tets M
    v0 v1 v2 v3      (M lines, zero-based)
    bfaces K
    v0 v1 v2 chart   (K lines)

Whitespace separated; ``#`` starts a comment.  Normals are recomputed on load.
"""
import json
from pathlib import Path

import numpy as np

from .errors import MeshFormatError
from .geometry import TetMesh

HEADER = "lipmax-mesh 1"


def _lines(text):
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield no, line


def parse_mesh(text):
    it = _lines(text)
    try:
        no, line = next(it)
    except StopIteration:
        raise MeshFormatError("empty file", 1) from None
    if " ".join(line.split()) != HEADER:
        raise MeshFormatError(f"expected header '{HEADER}'", no)
    sections = {}
    for name, width, kind in (("vertices", 3, float), ("tets", 4, int), ("bfaces", 4, int)):
        try:
            no, line = next(it)
        except StopIteration:
            raise MeshFormatError(f"missing section '{name}'") from None
        parts = line.split()
        if len(parts) != 2 or parts[0] != name:
            raise MeshFormatError(f"expected '{name} <count>'", no)
        try:
            count = int(parts[1])
        except ValueError:
            raise MeshFormatError(f"bad count '{parts[1]}'", no) from None
        rows = []
        for _ in range(count):
            try:
                no, line = next(it)
            except StopIteration:
                raise MeshFormatError(f"section '{name}' ended early", no) from None
            parts = line.split()
            if len(parts) != width:
                raise MeshFormatError(f"expected {width} fields in '{name}'", no)
            try:
                rows.append([kind(p) for p in parts])
            except ValueError:
                raise MeshFormatError(f"cannot parse '{line}'", no) from None
        sections[name] = np.array(rows, dtype=kind).reshape(count, width)
    extra = next(it, None)
    if extra is not None:
        raise MeshFormatError("unexpected trailing content", extra[0])
    bf = sections["bfaces"]
    return TetMesh(sections["vertices"], sections["tets"], bf[:, :3], bf[:, 3])


def load_mesh(path):
    """Read and validate a mesh file (all TetMesh invariants are checked)."""
    return parse_mesh(Path(path).read_text())


def format_mesh(mesh):
    out = [HEADER, f"vertices {len(mesh.vertices)}"]
    out += [" ".join(repr(float(c)) for c in v) for v in mesh.vertices]
    out.append(f"tets {len(mesh.tets)}")
    out += [" ".join(str(int(i)) for i in t) for t in mesh.tets]
    out.append(f"bfaces {len(mesh.bfaces)}")
    out += [" ".join(str(int(i)) for i in f) + f" {int(c)}" for f, c in zip(mesh.bfaces, mesh.bface_chart)]
    return "\n".join(out) + "\n"


def save_mesh(path, mesh):
    # repr() of floats round-trips exactly, so the vertex table reloads bit-identically
    Path(path).write_text(format_mesh(mesh))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def dumps_record(record):
    return json.dumps(_jsonable(record), sort_keys=True, allow_nan=True)


def save_report(path, report):
    """Write a report (a BoundCheckReport or an iterable of records) as JSON lines."""
    records = report.records() if hasattr(report, "records") else list(report)
    Path(path).write_text("".join(dumps_record(r) + "\n" for r in records))


def load_report(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
