"""
Compositional query generation from attribute co-occurrence, and the
capture-recapture completeness estimate for two annotation sources.

A candidate query is kept when it is *meaningful* (its result is at least
``lift_min`` times the size expected if its atoms were independent), *not
trivial* (its result is at most ``contain_max`` of its smallest atom) and its
result size lies in ``[min_result, max_result]``.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import (GROUND_TRUTH, EntityCatalog, ObservationMatrix, Query, ground_truth_match,
                   read_query_file, rho, write_query_file)
from .evalharness import (DIFFERENCE, INTERSECTION, SINGLETON, TASKS, TRIPLE_DIFFERENCE,
                          TRIPLE_INTERSECTION, task_kind)

_log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenCriteria:
    lift_min: float = 1.5
    contain_max: float = 0.8
    min_result: int = 10
    max_result: int | None = None  # None: half the item count

    def __post_init__(self):
        if not self.lift_min > 0:
            raise ValueError("lift_min must be positive")
        if not 0 < self.contain_max < 1:
            raise ValueError("contain_max must lie in (0, 1)")
        if self.min_result < 1:
            raise ValueError("min_result must be at least 1")

    def resolved_max(self, m: int) -> int:
        return m // 2 if self.max_result is None else self.max_result

    def accepts(self, size: int, atom_sizes, m: int) -> bool:
        "Apply the three criteria to a query of result ``size`` over the given atom sizes."
        atom_sizes = [int(s) for s in atom_sizes]
        k = len(atom_sizes)
        expected = float(np.prod(np.asarray(atom_sizes, dtype=np.float64))) / float(m) ** (k - 1)
        if size < self.lift_min * expected:
            return False
        if size > self.contain_max * min(atom_sizes):
            return False
        return self.min_result <= size <= self.resolved_max(m)


@dataclass(frozen=True)
class BenchmarkQuery:
    query: Query
    items: frozenset
    rho: float


@dataclass
class QueryBenchmark:
    tasks: dict[str, list[BenchmarkQuery]] = field(default_factory=dict)
    header: dict = field(default_factory=dict)

    def counts(self) -> dict[str, int]:
        return {t: len(self.tasks.get(t, [])) for t in TASKS}

    def mean_rho(self) -> dict[str, float]:
        return {t: float(np.mean([bq.rho for bq in qs])) for t, qs in self.tasks.items() if qs}

    def eval_tasks(self) -> dict[str, list[tuple[Query, frozenset]]]:
        return {t: [(bq.query, bq.items) for bq in self.tasks[t]] for t in TASKS if self.tasks.get(t)}

    def all_queries(self) -> list[BenchmarkQuery]:
        return [bq for t in TASKS for bq in self.tasks.get(t, [])]

    def write(self, path, catalog: EntityCatalog):
        write_query_file(path, ((bq.query, bq.items) for bq in self.all_queries()), catalog,
                         header=self.header)

    @classmethod
    def load(cls, path, catalog: EntityCatalog, o: ObservationMatrix | None = None) -> "QueryBenchmark":
        """
        Load a JSON-lines query file, grouping queries by task shape.

        With ground truth ``o`` the result ratio is recomputed from it;
        without it ``rho`` is NaN.
        """
        bench = cls({t: [] for t in TASKS})
        skipped = 0
        for q, items in read_query_file(path, catalog):
            task = task_kind(q)
            if task is None:
                skipped += 1
                continue
            r = rho(q, o) if o is not None else float("nan")
            bench.tasks[task].append(BenchmarkQuery(q, items, r))
        if skipped:
            _log.warning("%d queries with shapes outside the five tasks were skipped", skipped)
        return bench


def cooccurrence_stats(o: ObservationMatrix) -> tuple[np.ndarray, np.ndarray]:
    """
    Attribute co-occurrence counts ``C[a, b] = |I(a) ∩ I(b)|`` and column sizes.

    The diagonal holds ``|I(a)|``.
    """
    x = o.matrix.astype(bool).astype(np.int64)
    counts = np.asarray((x.T @ x).toarray(), dtype=np.int64)
    return counts, np.diag(counts).copy()


def matrix_digest(o: ObservationMatrix) -> str:
    rows, cols, data = o.pairs()
    h = hashlib.sha256()
    h.update(np.asarray(o.shape, dtype=np.int64).tobytes())
    h.update(rows.tobytes())
    h.update(cols.tobytes())
    h.update(data.tobytes())
    return h.hexdigest()


def generate_queries(o: ObservationMatrix, criteria: GenCriteria = GenCriteria()) -> QueryBenchmark:
    """
    Enumerate singleton, pair and triple queries that pass ``criteria``.

    Triples only extend accepted intersection pairs ``a & b`` (``a < b``):
    ``a & b & c`` with ``c > b`` and ``a & b & !c`` with any other ``c``.
    Output order is lexicographic in attribute indices within each task.
    """
    if o.kind != GROUND_TRUTH:
        raise ValueError("queries are generated from ground truth")
    m, n = o.shape
    cols = o.to_bool_dense()
    colf = cols.astype(np.float64)
    counts, sizes = cooccurrence_stats(o)
    ok = criteria.accepts

    def emit(task, q, mask):
        size = int(mask.sum())
        smallest = min(m - sizes[lit.attribute] if lit.negated else sizes[lit.attribute] for lit in q.literals)
        bench.tasks[task].append(BenchmarkQuery(q, frozenset(np.flatnonzero(mask).tolist()), size / smallest))

    bench = QueryBenchmark({t: [] for t in TASKS})
    for a in range(n):
        if sizes[a] >= criteria.min_result:
            emit(SINGLETON, Query.of(a), cols[:, a])

    pairs = []
    for a in range(n):
        for b in range(a + 1, n):
            if ok(counts[a, b], (sizes[a], sizes[b]), m):
                pairs.append((a, b))
                emit(INTERSECTION, Query.of(a, b), cols[:, a] & cols[:, b])
    for a in range(n):
        for b in range(n):
            if a != b and ok(sizes[a] - counts[a, b], (sizes[a], m - sizes[b]), m):
                emit(DIFFERENCE, Query.of(a, negate=[b]), cols[:, a] & ~cols[:, b])

    for a, b in pairs:
        ab = cols[:, a] & cols[:, b]
        nab = int(counts[a, b])
        with_c = ab.astype(np.float64) @ colf
        for c in range(n):
            if c in (a, b):
                continue
            if c > b and ok(int(with_c[c]), (sizes[a], sizes[b], sizes[c]), m):
                emit(TRIPLE_INTERSECTION, Query.of(a, b, c), ab & cols[:, c])
        for c in range(n):
            if c in (a, b):
                continue
            if ok(nab - int(with_c[c]), (sizes[a], sizes[b], m - sizes[c]), m):
                emit(TRIPLE_DIFFERENCE, Query.of(a, b, negate=[c]), ab & ~cols[:, c])

    crit = asdict(criteria)
    crit["max_result"] = criteria.resolved_max(m)
    bench.header = {"criteria": crit, "source_sha256": matrix_digest(o), "items": m, "attributes": n,
                    "counts": bench.counts()}
    _log.info("generated queries: %s", bench.counts())
    return bench


def verify_benchmark(bench: QueryBenchmark, o: ObservationMatrix):
    "Check stored item sets and ratios against ground truth; raises AssertionError."
    for bq in bench.all_queries():
        truth = ground_truth_match(bq.query, o)
        if truth != bq.items:
            raise AssertionError(f"ground truth mismatch for {bq.query}")
        if not np.isclose(rho(bq.query, o), bq.rho, rtol=0, atol=1e-12):
            raise AssertionError(f"rho mismatch for {bq.query}")


@dataclass(frozen=True)
class CompletenessRow:
    attribute: int
    count_o: int
    count_o_prime: int
    overlap: int
    est_true: float
    completeness_o: float
    completeness_o_prime: float


@dataclass
class CompletenessReport:
    rows: list[CompletenessRow]
    completeness_o: float
    completeness_o_prime: float
    attribute_coverage: float
    pair_coverage: float
    skipped: int

    def to_tsv(self, catalog: EntityCatalog | None = None) -> str:
        lines = ["attribute\tcountO\tcountOPrime\toverlap\testTrue\tcomplO\tcomplOPrime"]
        for r in self.rows:
            name = catalog.attributes[r.attribute] if catalog else str(r.attribute)
            lines.append(f"{name}\t{r.count_o}\t{r.count_o_prime}\t{r.overlap}\t{r.est_true:.6f}\t"
                         f"{r.completeness_o:.6f}\t{r.completeness_o_prime:.6f}")
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        return (f"completeness(O)={self.completeness_o:.4f}\tcompleteness(O')={self.completeness_o_prime:.4f}\t"
                f"attributes={self.attribute_coverage:.4f}\tpairs={self.pair_coverage:.4f}\t"
                f"included={len(self.rows)}\tskipped={self.skipped}")


def estimate_completeness(o: ObservationMatrix, o_prime: ObservationMatrix, min_overlap: int = 5) -> CompletenessReport:
    """
    Estimate the hidden true annotation size per attribute as
    ``count_o * count_o_prime / overlap`` and report how complete each source is.

    Attributes whose overlap is below ``min_overlap`` (or zero) are left out of
    the rows and the aggregates.  Coverage is measured against attributes and
    pairs present in ``o``.
    """
    if o.shape != o_prime.shape:
        raise ValueError("matrices must share the catalog")
    x = o.matrix.astype(bool).tocsc()
    y = o_prime.matrix.astype(bool).tocsc()
    count_o = np.diff(x.indptr)
    count_p = np.diff(y.indptr)
    overlap = np.asarray(x.multiply(y).sum(axis=0)).ravel().astype(np.int64)

    rows = []
    for a in np.flatnonzero((overlap >= max(min_overlap, 1))):
        est = count_o[a] * count_p[a] / overlap[a]
        rows.append(CompletenessRow(int(a), int(count_o[a]), int(count_p[a]), int(overlap[a]), float(est),
                                    float(overlap[a] / count_p[a]), float(overlap[a] / count_o[a])))
    present = int(np.count_nonzero(count_o))
    if rows:
        sum_o = sum(r.count_o for r in rows)
        sum_p = sum(r.count_o_prime for r in rows)
        sum_est = sum(r.est_true for r in rows)
        agg_o, agg_p = sum_o / sum_est, sum_p / sum_est
    else:
        sum_o, agg_o, agg_p = 0, float("nan"), float("nan")
    return CompletenessReport(rows, agg_o, agg_p,
                              len(rows) / present if present else float("nan"),
                              sum_o / o.nnz if o.nnz else float("nan"),
                              present - len(rows))
