"""PLY point clouds, transform records and correspondence CSV files.

Every writer goes through :func:`atomic_write` so a failed run never leaves
a partial file behind.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .errors import PlyHeaderError, PlyLayoutError, PlyParseError, PlyTruncatedError, ValidationError
from .features import CorrespondenceSet
from .geometry import PointCloud, RigidTransform

PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}
FLOAT_TYPES = {"f4", "f8"}


@contextmanager
def atomic_write(path, mode="w"):
    """Write to a temporary sibling file and rename it over ``path`` on success."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, mode) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def _parse_header(data: bytes):
    if not data.startswith(b"ply"):
        raise PlyHeaderError("missing 'ply' magic", offset=0)
    end = data.find(b"end_header")
    if end < 0:
        raise PlyHeaderError("header has no end_header line", offset=len(data))
    nl = data.find(b"\n", end)
    if nl < 0:
        raise PlyHeaderError("end_header line is not terminated", offset=len(data))
    body_start = nl + 1
    fmt = None
    elements = []  # [name, count, [(prop, dtype)]]
    offset = 0
    for raw in data[:body_start].split(b"\n"):
        line_offset = offset
        offset += len(raw) + 1
        line = raw.decode("ascii", errors="replace").strip()
        if not line or line == "ply" or line.startswith(("comment", "obj_info")):
            continue
        tok = line.split()
        if tok[0] == "format":
            if len(tok) != 3 or tok[1] not in ("ascii", "binary_little_endian", "binary_big_endian"):
                raise PlyHeaderError(f"bad format line {line!r}", offset=line_offset)
            if tok[1] == "binary_big_endian":
                raise PlyLayoutError("big-endian PLY is not supported", offset=line_offset)
            fmt = tok[1]
        elif tok[0] == "element":
            if len(tok) != 3 or not tok[2].isdigit():
                raise PlyHeaderError(f"bad element line {line!r}", offset=line_offset)
            elements.append([tok[1], int(tok[2]), []])
        elif tok[0] == "property":
            if not elements:
                raise PlyHeaderError("property before any element", offset=line_offset)
            if len(tok) >= 2 and tok[1] == "list":
                elements[-1][2].append((tok[-1], "list"))
                continue
            if len(tok) != 3 or tok[1] not in PLY_TYPES:
                raise PlyHeaderError(f"bad property line {line!r}", offset=line_offset)
            elements[-1][2].append((tok[2], PLY_TYPES[tok[1]]))
        elif tok[0] == "end_header":
            break
        else:
            raise PlyHeaderError(f"unexpected header line {line!r}", offset=line_offset)
    if fmt is None:
        raise PlyHeaderError("header has no format line", offset=0)
    if not elements or elements[0][0] != "vertex":
        raise PlyLayoutError("first element must be 'vertex'", offset=0)
    name, count, props = elements[0]
    names = [p for p, _ in props]
    if any(t == "list" for _, t in props):
        raise PlyLayoutError("list properties on vertices are not supported", offset=0)
    for axis in ("x", "y", "z"):
        if axis not in names:
            raise PlyLayoutError(f"vertex element lacks property {axis!r}", offset=0)
        if dict(props)[axis] not in FLOAT_TYPES:
            raise PlyLayoutError(f"vertex property {axis!r} must be float or double", offset=0)
    return fmt, count, props, body_start


def _columns(table, names):
    has_normals = all(n in names for n in ("nx", "ny", "nz"))
    pts = np.column_stack([table["x"], table["y"], table["z"]]).astype(float)
    normals = None
    if has_normals:
        normals = np.column_stack([table["nx"], table["ny"], table["nz"]]).astype(float)
        lengths = np.linalg.norm(normals, axis=1)
        nz = lengths > 0
        normals[nz] /= lengths[nz, None]
    return pts, normals


def read_cloud(path) -> PointCloud:
    """Read the vertex element of an ASCII or binary little-endian PLY file."""
    data = Path(path).read_bytes()
    fmt, count, props, body = _parse_header(data)
    names = [p for p, _ in props]
    if fmt == "ascii":
        lines = data[body:].split(b"\n")
        rows = []
        pos, li = body, 0
        for k in range(count):
            while li < len(lines) and not lines[li].strip():
                pos += len(lines[li]) + 1
                li += 1
            if li >= len(lines):
                raise PlyTruncatedError(
                    f"header declares {count} vertices but only {k} are present",
                    offset=min(pos, len(data)), record=k,
                )
            raw = lines[li]
            li += 1
            tok = raw.split()
            if len(tok) < len(props):
                raise PlyParseError(
                    f"vertex record has {len(tok)} values, expected {len(props)}", offset=pos, record=k
                )
            try:
                rows.append([float(v) for v in tok[:len(props)]])
            except ValueError:
                raise PlyParseError("non-numeric value in vertex record", offset=pos, record=k) from None
            pos += len(raw) + 1
        arr = np.array(rows, dtype=float).reshape(count, len(props))
        table = {n: arr[:, i] for i, n in enumerate(names)}
    else:
        dtype = np.dtype([(n, "<" + t) for n, t in props])
        need = count * dtype.itemsize
        have = len(data) - body
        if have < need:
            k = have // dtype.itemsize
            raise PlyTruncatedError(
                f"header declares {count} vertices but payload holds {k}",
                offset=body + k * dtype.itemsize, record=k,
            )
        table = np.frombuffer(data, dtype=dtype, count=count, offset=body)
    pts, normals = _columns(table, names)
    if not np.all(np.isfinite(pts)):
        raise PlyParseError("non-finite vertex coordinate", offset=body)
    return PointCloud(pts, normals)


def write_cloud(cloud: PointCloud, path, binary=True, dtype="double"):
    """Write ``cloud`` as PLY. ``dtype`` is ``"double"`` (lossless) or ``"float"``."""
    if dtype not in ("double", "float"):
        raise ValidationError(f"dtype must be 'double' or 'float', got {dtype!r}")
    np_t = "<f8" if dtype == "double" else "<f4"
    cols = ["x", "y", "z"] + (["nx", "ny", "nz"] if cloud.has_normals else [])
    header = ["ply", f"format {'binary_little_endian' if binary else 'ascii'} 1.0",
              f"element vertex {len(cloud)}"]
    header += [f"property {dtype} {c}" for c in cols]
    header.append("end_header")
    values = cloud.points if not cloud.has_normals else np.hstack([cloud.points, cloud.normals])
    head = ("\n".join(header) + "\n").encode("ascii")
    with atomic_write(path, "wb") as fh:
        fh.write(head)
        if binary:
            fh.write(np.ascontiguousarray(values, dtype=np_t).tobytes())
        else:
            v = values.astype(np_t).astype(float)
            for row in v:
                fh.write((" ".join(repr(float(x)) for x in row) + "\n").encode("ascii"))


def write_correspondences(corr: CorrespondenceSet, path):
    with atomic_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src_idx", "tgt_idx"])
        w.writerows(zip(corr.source_indices.tolist(), corr.target_indices.tolist()))


def read_correspondences(path) -> CorrespondenceSet:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["src_idx", "tgt_idx"]:
            raise ValidationError(f"{path}: expected header 'src_idx,tgt_idx', got {header}")
        src, tgt = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                a, b = (int(x) for x in row)
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: expected two integers, got {row}") from None
            src.append(a)
            tgt.append(b)
    return CorrespondenceSet(src, tgt)


def transform_to_list(t: RigidTransform):
    return [float(x) for x in t.as_matrix().reshape(-1)]


def transform_from_list(values, atol=1e-6) -> RigidTransform:
    arr = np.asarray(values, dtype=float)
    if arr.size != 16:
        raise ValidationError(f"a transform needs 16 numbers, got {arr.size}")
    return RigidTransform.from_matrix(arr.reshape(4, 4), atol=atol)


def read_transform(path, atol=1e-6) -> RigidTransform:
    """Load a transform from a JSON record (``"transform"``: 16 numbers) or 16 whitespace-separated numbers."""
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            rec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        if "transform" not in rec:
            raise ValidationError(f"{path}: JSON record has no 'transform' field")
        return transform_from_list(rec["transform"], atol)
    try:
        values = [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ValidationError(f"{path}: expected 16 numbers") from None
    return transform_from_list(values, atol)


def write_json(record, path=None):
    text = json.dumps(record, indent=2, sort_keys=True) + "\n"
    if path is None:
        return text
    with atomic_write(path) as fh:
        fh.write(text)
    return text


def write_transform(t: RigidTransform, path):
    write_json({"transform": transform_to_list(t)}, path)
