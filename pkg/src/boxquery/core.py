"""
Items, attributes, observation matrices and the conjunctive query algebra.

Queries are conjunctions of signed attribute literals, written in text as
``comedy & british & !romance``.  Ground-truth semantics are plain set
operations over the columns of a boolean observation matrix.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np
from scipy import sparse

_log = logging.getLogger(__name__)

GROUND_TRUTH = "groundTruth"
NOISY = "noisy"


class QueryError(ValueError):
    """Raised for malformed or invalid queries."""


class UndefinedRhoError(ZeroDivisionError):
    """Raised when the most restrictive atom of a query matches no items."""


class DataFormatError(ValueError):
    """Raised when an input file does not follow its line format."""

    def __init__(self, path, lineno: int, message: str):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{self.path}:{lineno}: {message}")


@dataclass(frozen=True)
class EntityCatalog:
    """Dense integer indexing of item and attribute identifiers."""

    items: tuple[str, ...]
    attributes: tuple[str, ...]
    _item_ix: dict = field(init=False, repr=False, compare=False)
    _attr_ix: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "attributes", tuple(self.attributes))
        item_ix = {name: i for i, name in enumerate(self.items)}
        attr_ix = {name: a for a, name in enumerate(self.attributes)}
        if len(item_ix) != len(self.items):
            raise ValueError("duplicate item identifiers")
        if len(attr_ix) != len(self.attributes):
            raise ValueError("duplicate attribute identifiers")
        object.__setattr__(self, "_item_ix", item_ix)
        object.__setattr__(self, "_attr_ix", attr_ix)

    @property
    def m(self) -> int:
        return len(self.items)

    @property
    def n(self) -> int:
        return len(self.attributes)

    def item_index(self, name: str) -> int:
        return self._item_ix[name]

    def attribute_index(self, name: str) -> int:
        return self._attr_ix[name]

    def has_attribute(self, name: str) -> bool:
        return name in self._attr_ix

    def has_item(self, name: str) -> bool:
        return name in self._item_ix

    def digest(self) -> str:
        h = hashlib.sha256()
        for name in self.items:
            h.update(b"i\x00" + name.encode("utf-8") + b"\x00")
        for name in self.attributes:
            h.update(b"a\x00" + name.encode("utf-8") + b"\x00")
        return h.hexdigest()

    def to_json(self) -> str:
        return json.dumps({"items": list(self.items), "attributes": list(self.attributes)})

    @classmethod
    def from_json(cls, text: str) -> "EntityCatalog":
        obj = json.loads(text)
        return cls(obj["items"], obj["attributes"])

    def save(self, path):
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "EntityCatalog":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


class ObservationMatrix:
    """
    Sparse item x attribute matrix.

    Ground-truth matrices are boolean (all stored weights 1) and kept in CSC
    form for fast per-attribute item sets; noisy matrices hold positive tag
    counts in CSR form for per-item iteration during training.
    """

    def __init__(self, matrix, kind: str = NOISY):
        if kind not in (GROUND_TRUTH, NOISY):
            raise ValueError(f"unknown matrix kind {kind!r}")
        mat = sparse.coo_matrix(matrix, dtype=np.float64)
        mat.sum_duplicates()
        mat.eliminate_zeros()
        if kind == GROUND_TRUTH:
            mat.data[:] = 1.0
            mat = mat.tocsc()
        else:
            if np.any(mat.data < 0) or not np.all(np.isfinite(mat.data)):
                raise ValueError("noisy observation weights must be positive and finite")
            mat = mat.tocsr()
        mat.sort_indices()
        self._mat = mat
        self._csc = mat if kind == GROUND_TRUTH else None
        self.kind = kind

    def _columns(self):
        if self._csc is None:
            self._csc = self._mat.tocsc()
            self._csc.sort_indices()
        return self._csc

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]], shape: tuple[int, int],
                   kind: str = GROUND_TRUTH, weights: Sequence[float] | None = None):
        pairs = list(pairs)
        rows = np.fromiter((p[0] for p in pairs), dtype=np.int64, count=len(pairs))
        cols = np.fromiter((p[1] for p in pairs), dtype=np.int64, count=len(pairs))
        if weights is None:
            data = np.ones(len(pairs))
        else:
            data = np.asarray(weights, dtype=np.float64)
        return cls(sparse.coo_matrix((data, (rows, cols)), shape=shape), kind)

    @classmethod
    def from_dense(cls, array, kind: str = GROUND_TRUTH):
        return cls(sparse.coo_matrix(np.asarray(array, dtype=np.float64)), kind)

    @property
    def shape(self) -> tuple[int, int]:
        return self._mat.shape

    @property
    def nnz(self) -> int:
        return self._mat.nnz

    @property
    def matrix(self):
        "The underlying scipy sparse matrix (do not mutate)."
        return self._mat

    def column_items(self, a: int) -> np.ndarray:
        "Sorted indices of items with a nonzero entry for attribute ``a``."
        col = self._columns()
        return col.indices[col.indptr[a]:col.indptr[a + 1]].copy()

    def column_sizes(self) -> np.ndarray:
        return np.diff(self._columns().indptr)

    def column_mask(self, a: int) -> np.ndarray:
        mask = np.zeros(self.shape[0], dtype=bool)
        mask[self.column_items(a)] = True
        return mask

    def to_bool_dense(self) -> np.ndarray:
        return self._mat.toarray() != 0

    def pairs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        "Nonzero entries as ``(items, attributes, weights)`` in row-major order."
        coo = self._mat.tocsr().tocoo()
        return coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data.copy()

    def as_ground_truth(self) -> "ObservationMatrix":
        return ObservationMatrix(self._mat, GROUND_TRUTH)

    def save(self, path):
        rows, cols, data = self.pairs()
        with open(path, "wb") as f:
            np.savez(f, rows=rows, cols=cols, data=data,
                     shape=np.asarray(self.shape), kind=np.asarray(self.kind))

    @classmethod
    def load(cls, path) -> "ObservationMatrix":
        with np.load(path) as z:
            shape = tuple(int(s) for s in z["shape"])
            mat = sparse.coo_matrix((z["data"], (z["rows"], z["cols"])), shape=shape)
            return cls(mat, str(z["kind"]))

    def __repr__(self):
        return f"<ObservationMatrix {self.kind} {self.shape[0]}x{self.shape[1]} nnz={self.nnz}>"


class Literal(NamedTuple):
    attribute: int
    negated: bool = False


@dataclass(frozen=True)
class Query:
    """A conjunction of signed attribute literals, in textual order."""

    literals: tuple[Literal, ...]

    def __post_init__(self):
        lits = tuple(Literal(int(lit[0]), bool(lit[1])) for lit in self.literals)
        object.__setattr__(self, "literals", lits)
        if not lits:
            raise QueryError("query has no literals")
        if not any(not lit.negated for lit in lits):
            raise QueryError("query needs at least one positive literal")
        attrs = [lit.attribute for lit in lits]
        if len(set(attrs)) != len(attrs):
            raise QueryError("attribute appears more than once in query")
        if min(attrs) < 0:
            raise QueryError("negative attribute index")

    @classmethod
    def of(cls, *attrs: int, negate: Iterable[int] = ()) -> "Query":
        "Shorthand: ``Query.of(a, b, negate=[c])`` is ``a & b & !c``."
        return cls(tuple(Literal(a, False) for a in attrs) + tuple(Literal(c, True) for c in negate))

    @property
    def positives(self) -> tuple[int, ...]:
        return tuple(lit.attribute for lit in self.literals if not lit.negated)

    @property
    def negatives(self) -> tuple[int, ...]:
        return tuple(lit.attribute for lit in self.literals if lit.negated)

    def __len__(self):
        return len(self.literals)

    def check(self, n: int):
        for lit in self.literals:
            if lit.attribute >= n:
                raise QueryError(f"attribute index {lit.attribute} out of range for {n} attributes")


def parse_query(text: str, catalog: EntityCatalog) -> Query:
    """
    Parse ``lit ( '&' lit )*`` where ``lit := ['!'] name``.

    Names are matched exactly after trimming surrounding whitespace.
    """
    if not text or not text.strip():
        raise QueryError("empty query")
    lits = []
    for tok in text.split("&"):
        tok = tok.strip()
        neg = tok.startswith("!")
        if neg:
            tok = tok[1:].strip()
        if not tok:
            raise QueryError(f"empty literal in query {text!r}")
        if not catalog.has_attribute(tok):
            raise QueryError(f"unknown attribute {tok!r}")
        lits.append(Literal(catalog.attribute_index(tok), neg))
    return Query(tuple(lits))


def format_query(q: Query, catalog: EntityCatalog) -> str:
    return " & ".join(("!" if lit.negated else "") + catalog.attributes[lit.attribute]
                      for lit in q.literals)


def _require_ground_truth(o: ObservationMatrix):
    if o.kind != GROUND_TRUTH:
        raise ValueError("expected a ground-truth observation matrix")


def match_mask(q: Query, o: ObservationMatrix) -> np.ndarray:
    "Boolean item mask of the ground-truth result of ``q``."
    _require_ground_truth(o)
    q.check(o.shape[1])
    mask = np.ones(o.shape[0], dtype=bool)
    for lit in q.literals:
        col = o.column_mask(lit.attribute)
        mask &= ~col if lit.negated else col
    return mask


def ground_truth_match(q: Query, o: ObservationMatrix) -> frozenset[int]:
    return frozenset(np.flatnonzero(match_mask(q, o)).tolist())


def atom_sizes(q: Query, o: ObservationMatrix) -> list[int]:
    "Result sizes of each atom ``a`` or ``!a`` of ``q``."
    m = o.shape[0]
    sizes = []
    for lit in q.literals:
        size = len(o.column_items(lit.attribute))
        sizes.append(m - size if lit.negated else size)
    return sizes


def rho(q: Query, o: ObservationMatrix) -> float:
    """
    Result size of ``q`` relative to its most restrictive atom.

    A negated atom ``!a`` matches every item outside ``I(a)``.
    """
    _require_ground_truth(o)
    smallest = min(atom_sizes(q, o))
    if smallest == 0:
        raise UndefinedRhoError("most restrictive atom has an empty result")
    return int(match_mask(q, o).sum()) / smallest


@dataclass(frozen=True)
class HierarchyEdges:
    """``(child, parent)`` isA edges between attribute indices; must be acyclic."""

    isa: frozenset[tuple[int, int]]

    def __post_init__(self):
        edges = frozenset((int(c), int(p)) for c, p in self.isa)
        object.__setattr__(self, "isa", edges)
        graph: dict[int, set[int]] = {}
        for child, parent in edges:
            graph.setdefault(child, set()).add(parent)
        try:
            order = tuple(TopologicalSorter(graph).static_order())
        except CycleError as e:
            raise ValueError(f"cycle in attribute hierarchy: {e.args[1]}") from e
        # parents come before children in ``order``
        ancestors: dict[int, frozenset[int]] = {}
        for node in order:
            acc: set[int] = set()
            for parent in graph.get(node, ()):
                acc.add(parent)
                acc |= ancestors[parent]
            ancestors[node] = frozenset(acc)
        object.__setattr__(self, "_ancestors", ancestors)

    def ancestors(self, a: int) -> frozenset[int]:
        return self._ancestors.get(a, frozenset())


def expand_with_hierarchy(o: ObservationMatrix, h: HierarchyEdges) -> ObservationMatrix:
    """Add every ancestor attribute of each observed pair."""
    _require_ground_truth(o)
    items, attrs, _ = o.pairs()
    out_items = [items]
    out_attrs = [attrs]
    for a in np.unique(attrs):
        anc = h.ancestors(int(a))
        if not anc:
            continue
        col = items[attrs == a]
        for parent in anc:
            out_items.append(col)
            out_attrs.append(np.full(len(col), parent, dtype=np.int64))
    rows = np.concatenate(out_items)
    cols = np.concatenate(out_attrs)
    mat = sparse.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=o.shape)
    return ObservationMatrix(mat, GROUND_TRUTH)


# file formats

def read_pairs(path) -> list[tuple[str, str, float]]:
    """
    Read ``item<TAB>attribute[<TAB>weight]`` lines.

    Blank lines are skipped.  Raises :class:`DataFormatError` naming the line.
    """
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3) or not parts[0] or not parts[1]:
                raise DataFormatError(path, lineno, "expected item<TAB>attribute[<TAB>weight]")
            weight = 1.0
            if len(parts) == 3:
                try:
                    weight = float(parts[2])
                except ValueError:
                    raise DataFormatError(path, lineno, f"bad weight {parts[2]!r}") from None
                if not np.isfinite(weight) or weight <= 0:
                    raise DataFormatError(path, lineno, f"weight must be positive, got {parts[2]!r}")
            out.append((parts[0], parts[1], weight))
    if not out:
        raise DataFormatError(path, 0, "no observations in file")
    return out


def read_hierarchy_pairs(path) -> list[tuple[str, str]]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise DataFormatError(path, lineno, "expected child<TAB>parent")
            out.append((parts[0], parts[1]))
    return out


def build_catalog(*pair_lists: Iterable[tuple], hierarchy: Iterable[tuple[str, str]] = ()) -> EntityCatalog:
    "Catalog in order of first appearance across the given pair lists."
    items: dict[str, None] = {}
    attrs: dict[str, None] = {}
    for pairs in pair_lists:
        for rec in pairs:
            items.setdefault(rec[0], None)
            attrs.setdefault(rec[1], None)
    for child, parent in hierarchy:
        attrs.setdefault(child, None)
        attrs.setdefault(parent, None)
    return EntityCatalog(tuple(items), tuple(attrs))


def matrix_from_named(pairs: Sequence[tuple], catalog: EntityCatalog, kind: str) -> ObservationMatrix:
    """
    Index named ``(item, attribute, weight)`` records.

    Duplicate pairs have their weights summed (noisy) or collapsed (ground
    truth), with a warning either way.
    """
    rows = np.fromiter((catalog.item_index(p[0]) for p in pairs), dtype=np.int64, count=len(pairs))
    cols = np.fromiter((catalog.attribute_index(p[1]) for p in pairs), dtype=np.int64, count=len(pairs))
    data = np.fromiter((p[2] if len(p) > 2 else 1.0 for p in pairs), dtype=np.float64, count=len(pairs))
    keys = rows * catalog.n + cols
    ndup = len(keys) - len(np.unique(keys))
    if ndup:
        _log.warning("%d duplicate item-attribute pairs (weights summed)", ndup)
    mat = sparse.coo_matrix((data, (rows, cols)), shape=(catalog.m, catalog.n))
    return ObservationMatrix(mat, kind)


def hierarchy_from_named(pairs: Iterable[tuple[str, str]], catalog: EntityCatalog) -> HierarchyEdges:
    return HierarchyEdges(frozenset((catalog.attribute_index(c), catalog.attribute_index(p))
                                    for c, p in pairs))


def iter_query_file(path) -> Iterator[tuple[int, dict]]:
    "Yield ``(lineno, record)`` for each query line of a JSON-lines benchmark file."
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataFormatError(path, lineno, f"invalid JSON: {e.msg}") from None
            if "header" in rec:
                continue
            if "query" not in rec or "items" not in rec:
                raise DataFormatError(path, lineno, "record needs 'query' and 'items'")
            yield lineno, rec


def read_query_file(path, catalog: EntityCatalog) -> list[tuple[Query, frozenset[int]]]:
    out = []
    for lineno, rec in iter_query_file(path):
        try:
            q = parse_query(rec["query"], catalog)
            items = frozenset(catalog.item_index(i) for i in rec["items"])
        except (QueryError, KeyError) as e:
            raise DataFormatError(path, lineno, str(e)) from None
        out.append((q, items))
    return out


def write_query_file(path, queries: Iterable[tuple[Query, Iterable[int]]], catalog: EntityCatalog,
                     header: dict | None = None):
    with open(path, "w", encoding="utf-8") as f:
        if header is not None:
            f.write(json.dumps({"header": header}, sort_keys=True) + "\n")
        for q, items in queries:
            rec = {"query": format_query(q, catalog), "items": [catalog.items[i] for i in sorted(items)]}
            f.write(json.dumps(rec) + "\n")


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
