"""File formats: 8-bit binary PGM, schema-headed CSV and JSON, all written atomically."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

CSV_SCHEMA_VERSION = 1


def atomic_write(path, data: bytes):
    """Write to a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _pgm_tokens(data: bytes, count: int):
    """First ``count`` header tokens and the offset of the pixel data."""
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos + 1  # a single whitespace byte precedes the raster


def read_pgm(path) -> np.ndarray:
    """Binary (P5) 8-bit PGM as floats in ``[0, 1]``."""
    data = Path(path).read_bytes()
    tokens, offset = _pgm_tokens(data, 4)
    if tokens[0] != b"P5":
        raise ValueError("not a binary PGM (P5) file")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ValueError("malformed PGM header") from None
    if w < 1 or h < 1 or not 0 < maxval < 256:
        raise ValueError("only 8-bit PGM images are supported")
    raster = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=offset) if len(data) - offset >= w * h else None
    if raster is None:
        raise ValueError("PGM raster is truncated")
    return raster.reshape(h, w).astype(float) / maxval


def write_pgm(path, image):
    """Clip to ``[0, 1]`` and store as 8-bit P5."""
    a = np.asarray(image, dtype=float)
    if a.ndim != 2:
        raise ValueError("expected a 2-D image")
    pix = np.round(np.clip(a, 0.0, 1.0) * 255).astype(np.uint8)
    header = f"P5\n{a.shape[1]} {a.shape[0]}\n255\n".encode()
    atomic_write(path, header + pix.tobytes())


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def write_csv(path, columns: dict, schema: str):
    """Columns of equal length; the first line names the schema and version."""
    names = list(columns)
    lengths = {len(columns[k]) for k in names}
    if len(lengths) > 1:
        raise ValueError("CSV columns differ in length")
    buf = io.StringIO()
    buf.write(f"# schema: {schema} v{CSV_SCHEMA_VERSION}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in zip(*(columns[k] for k in names)):
        writer.writerow([_fmt(v) for v in row])
    atomic_write(path, buf.getvalue().encode())


def read_csv(path) -> tuple[str, dict]:
    """Returns ``(schema line, columns)``; numeric columns come back as float arrays."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# schema:"):
        raise ValueError("CSV lacks a schema header")
    schema = lines[0][len("# schema:"):].strip()
    rows = list(csv.reader(lines[1:]))
    names = rows[0]
    cols = {}
    for i, name in enumerate(names):
        raw = [r[i] for r in rows[1:]]
        try:
            cols[name] = np.array([float(v) if v else np.nan for v in raw])
        except ValueError:
            cols[name] = raw
    return schema, cols


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def to_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default)


def write_json(path, obj):
    atomic_write(path, (to_json(obj) + "\n").encode())


def read_json(path):
    return json.loads(Path(path).read_text())
