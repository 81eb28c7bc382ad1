"""
Checkpoint container shared by vector and box models.

The first line is a JSON header; the tables follow either as text (one row
per line, values in shortest round-trip decimal form) or as little-endian
64-bit float blocks, in the order listed under ``tables``.
"""

from __future__ import annotations

import json

import numpy as np

from .boxgeom import GumbelParams
from .boxmodel import BoxModel
from .vecmodel import VectorModel

MAGIC = "boxquery-checkpoint"
TEXT = "text"
BINARY = "binary"

_VECTOR_TABLES = ("item_vecs", "attr_vecs")
_BOX_TABLES = ("item_mins", "item_maxs", "attr_mins", "attr_maxs")


def _header(model, catalog_hash: str | None, encoding: str) -> dict:
    head = {"format": MAGIC, "version": 1, "d": model.dim, "m": model.m, "n": model.n,
            "catalogHash": catalog_hash, "encoding": encoding}
    if isinstance(model, BoxModel):
        head.update(modelKind="box", beta=model.temps.beta, tau=model.temps.tau, tables=list(_BOX_TABLES))
    else:
        head.update(modelKind="vector", transform=model.transform, tables=list(_VECTOR_TABLES))
    return head


def dumps(model: VectorModel | BoxModel, catalog_hash: str | None = None, encoding: str = TEXT) -> bytes:
    if encoding not in (TEXT, BINARY):
        raise ValueError(f"unknown encoding {encoding!r}")
    head = _header(model, catalog_hash, encoding)
    out = [json.dumps(head, sort_keys=True).encode("utf-8") + b"\n"]
    for name in head["tables"]:
        table = np.asarray(getattr(model, name), dtype=np.float64)
        if encoding == TEXT:
            out.append("".join(" ".join(repr(float(v)) for v in row) + "\n" for row in table).encode("ascii"))
        else:
            out.append(table.astype("<f8").tobytes())
    return b"".join(out)


def loads(data: bytes) -> tuple[VectorModel | BoxModel, dict]:
    nl = data.index(b"\n")
    head = json.loads(data[:nl].decode("utf-8"))
    if head.get("format") != MAGIC:
        raise ValueError("not a checkpoint file")
    body = data[nl + 1:]
    d, m, n = head["d"], head["m"], head["n"]
    rows = {name: (m if name.startswith("item") else n) for name in head["tables"]}
    tables = {}
    if head["encoding"] == BINARY:
        off = 0
        for name in head["tables"]:
            size = rows[name] * d * 8
            tables[name] = np.frombuffer(body[off:off + size], dtype="<f8").reshape(rows[name], d).astype(np.float64)
            off += size
    else:
        lines = body.decode("ascii").splitlines()
        off = 0
        for name in head["tables"]:
            chunk = lines[off:off + rows[name]]
            tables[name] = (np.array([[float(v) for v in line.split()] for line in chunk], dtype=np.float64)
                            .reshape(rows[name], d))
            off += rows[name]
    if head["modelKind"] == "box":
        model = BoxModel(tables["item_mins"], tables["item_maxs"], tables["attr_mins"], tables["attr_maxs"],
                         GumbelParams(head["beta"], head["tau"]))
    else:
        model = VectorModel(tables["item_vecs"], tables["attr_vecs"], head["transform"])
    return model, head


def save(path, model, catalog_hash: str | None = None, encoding: str = TEXT):
    with open(path, "wb") as f:
        f.write(dumps(model, catalog_hash, encoding))


def load(path) -> tuple[VectorModel | BoxModel, dict]:
    with open(path, "rb") as f:
        return loads(f.read())
