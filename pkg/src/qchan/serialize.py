"""The qchan-v1 JSON channel file format.

Layout::

    {
      "format": "qchan-v1",
      "m": 2, "n": 2,
      "representation": "kraus" | "choi",
      "kraus": [ [[ [re,im], ... ] per row] per operator ]   (n x m row-major)
      "choi":  [ [[re,im], ...] per row ]                    (mn x mn row-major)
    }

Complex entries are two-element arrays [re, im].  The Choi matrix uses
the flat index (i-1)*n + p for block i, row p.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .channel import Channel
from .errors import ShapeError
from .linalg import DEFAULT_TOL, TolerancePolicy

FORMAT_TAG = "qchan-v1"


def _encode_matrix(a: np.ndarray) -> list:
    return [[[float(x.real), float(x.imag)] for x in row] for row in np.asarray(a, complex)]


def _decode_matrix(rows, what: str) -> np.ndarray:
    if not isinstance(rows, list) or not rows:
        raise ShapeError(f"{what}: expected a nonempty list of rows")
    width = None
    out = []
    for row in rows:
        if not isinstance(row, list):
            raise ShapeError(f"{what}: rows must be lists")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ShapeError(f"{what}: ragged rows")
        entries = []
        for cell in row:
            if (
                not isinstance(cell, list)
                or len(cell) != 2
                or not all(isinstance(v, (int, float)) for v in cell)
            ):
                raise ShapeError(f"{what}: entries must be [re, im] pairs")
            entries.append(complex(cell[0], cell[1]))
        out.append(entries)
    a = np.array(out, dtype=complex)
    if not np.isfinite(a).all():
        raise ShapeError(f"{what}: non-finite entry")
    return a


def channel_to_dict(channel: Channel, representation: str = "choi") -> dict:
    if representation not in ("choi", "kraus"):
        raise ValueError(f"unknown representation {representation!r}")
    doc = {
        "format": FORMAT_TAG,
        "m": channel.m,
        "n": channel.n,
        "representation": representation,
    }
    if representation == "choi":
        doc["choi"] = _encode_matrix(channel.choi)
    else:
        doc["kraus"] = [_encode_matrix(a) for a in channel.kraus]
    return doc


def channel_from_dict(doc: dict, tol: TolerancePolicy = DEFAULT_TOL) -> Channel:
    if not isinstance(doc, dict):
        raise ShapeError("channel document must be a JSON object")
    if doc.get("format") != FORMAT_TAG:
        raise ShapeError(f"unsupported format tag {doc.get('format')!r}")
    try:
        m, n = int(doc["m"]), int(doc["n"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ShapeError("fields 'm' and 'n' must be integers") from exc
    if m < 1 or n < 1:
        raise ShapeError("dimensions must be positive")
    rep = doc.get("representation")
    if rep == "choi":
        z = _decode_matrix(doc.get("choi"), "choi")
        if z.shape != (m * n, m * n):
            raise ShapeError(f"choi: expected shape {(m * n, m * n)}, got {z.shape}")
        return Channel.from_choi(z, m, n, tol=tol)
    if rep == "kraus":
        ops_doc = doc.get("kraus")
        if not isinstance(ops_doc, list) or not ops_doc:
            raise ShapeError("kraus: expected a nonempty list of operators")
        ops = []
        for idx, mat in enumerate(ops_doc):
            a = _decode_matrix(mat, f"kraus[{idx}]")
            if a.shape != (n, m):
                raise ShapeError(
                    f"kraus[{idx}]: expected shape {(n, m)}, got {a.shape}"
                )
            ops.append(a)
        return Channel.from_kraus(ops, tol=tol)
    raise ShapeError(f"unknown representation {rep!r}")


def save_channel(channel: Channel, path, representation: str = "choi") -> None:
    doc = channel_to_dict(channel, representation)
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


def load_channel(path, tol: TolerancePolicy = DEFAULT_TOL) -> Channel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ShapeError(f"invalid JSON: {exc}") from exc
    return channel_from_dict(doc, tol=tol)


def loads_channel(text: str, tol: TolerancePolicy = DEFAULT_TOL) -> Channel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ShapeError(f"invalid JSON: {exc}") from exc
    return channel_from_dict(doc, tol=tol)
