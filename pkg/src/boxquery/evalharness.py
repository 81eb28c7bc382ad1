"""
Precision@k evaluation over query tasks, and the attribute-lookup baseline.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import ObservationMatrix, Query

_log = logging.getLogger(__name__)

DEFAULT_KS = (1, 10, 20, 50)

SINGLETON = "singleton"
INTERSECTION = "intersection"
DIFFERENCE = "difference"
TRIPLE_INTERSECTION = "tripleIntersection"
TRIPLE_DIFFERENCE = "tripleDifference"
TASKS = (SINGLETON, INTERSECTION, DIFFERENCE, TRIPLE_INTERSECTION, TRIPLE_DIFFERENCE)

_SHAPES = {
    (1, 0): SINGLETON,
    (2, 0): INTERSECTION,
    (1, 1): DIFFERENCE,
    (3, 0): TRIPLE_INTERSECTION,
    (2, 1): TRIPLE_DIFFERENCE,
}


def task_kind(q: Query) -> str | None:
    "Task name for the shape of ``q``, or None for shapes outside the five tasks."
    return _SHAPES.get((len(q.positives), len(q.negatives)))


def precision_at_k(ranked: Sequence[int], truth, k: int) -> float:
    """
    Fraction of the top ``k`` that is in ``truth``.

    The denominator is always ``k``, so short result lists are penalized.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    ranked = list(ranked)
    if len(set(ranked)) != len(ranked):
        raise ValueError("ranked list contains duplicates")
    hits = sum(1 for i in ranked[:k] if i in truth)
    return hits / k


def lookup_scores(o_prime: ObservationMatrix, q: Query) -> tuple[np.ndarray, np.ndarray]:
    "Candidate mask and summed positive-literal weights for the lookup baseline."
    mat = o_prime.matrix.tocsc()
    m = o_prime.shape[0]
    mask = np.ones(m, dtype=bool)
    weight = np.zeros(m)
    for lit in q.literals:
        lo, hi = mat.indptr[lit.attribute], mat.indptr[lit.attribute + 1]
        rows = mat.indices[lo:hi]
        col = np.zeros(m, dtype=bool)
        col[rows] = True
        if lit.negated:
            mask &= ~col
        else:
            mask &= col
            np.add.at(weight, rows, mat.data[lo:hi])
    return mask, weight


def lookup_rank(o_prime: ObservationMatrix, q: Query, k: int) -> list[int]:
    """
    Exact set semantics on the noisy matrix, ranked by summed tag counts.
    """
    mask, weight = lookup_scores(o_prime, q)
    cand = np.flatnonzero(mask)
    order = np.lexsort((cand, -weight[cand]))
    return cand[order][:k].tolist()


class LookupRanker:
    """Lookup baseline bound to one noisy matrix (CSC copy cached)."""

    def __init__(self, o_prime: ObservationMatrix):
        self.o_prime = ObservationMatrix(o_prime.matrix.tocsc(), o_prime.kind)

    def __call__(self, q: Query, k: int) -> list[int]:
        return lookup_rank(self.o_prime, q, k)


@dataclass
class EvalReport:
    """Mean precision per ``(task, method, k)`` plus query counts."""

    means: dict[tuple[str, str, int], float] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    methods: list[str] = field(default_factory=list)
    ks: tuple[int, ...] = DEFAULT_KS
    details: list[tuple[str, int, str, int, float]] | None = None

    def get(self, task: str, method: str, k: int) -> float:
        return self.means[(task, method, k)]

    def to_tsv(self) -> str:
        lines = ["task\tmethod\tk\tmeanPrecision\tnumQueries"]
        for task in self.counts:
            for method in self.methods:
                for k in self.ks:
                    lines.append(f"{task}\t{method}\t{k}\t{self.means[(task, method, k)]:.6f}\t{self.counts[task]}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        width = max([len(m) for m in self.methods] + [7])
        out = []
        for task in self.counts:
            out.append(f"{task} ({self.counts[task]} queries)")
            out.append("  " + "Method".ljust(width) + "".join(f"{'P@' + str(k):>8}" for k in self.ks))
            for method in self.methods:
                cells = "".join(f"{100 * self.means[(task, method, k)]:8.1f}" for k in self.ks)
                out.append("  " + method.ljust(width) + cells)
            out.append("")
        return "\n".join(out)


def evaluate(methods: Mapping[str, Callable[[Query, int], list]],
             tasks: Mapping[str, Sequence[tuple[Query, frozenset]]],
             ks: Sequence[int] = DEFAULT_KS, threads: int = 1, keep_details: bool = False) -> EvalReport:
    """
    Rank items with every method for every query and average precision@k per task.

    ``methods`` maps a name to ``rank(query, k) -> item list``.  Results do not
    depend on ``threads``: queries are reduced in their original order.
    """
    ks = tuple(ks)
    kmax = max(ks)
    report = EvalReport(methods=list(methods), ks=ks, details=[] if keep_details else None)

    def run(args):
        rank, q, truth = args
        ranked = rank(q, kmax)
        return [precision_at_k(ranked, truth, k) for k in ks]

    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        for task, queries in tasks.items():
            if not queries:
                continue
            report.counts[task] = len(queries)
            for name, rank in methods.items():
                jobs = [(rank, q, truth) for q, truth in queries]
                rows = list(pool.map(run, jobs)) if pool else [run(j) for j in jobs]
                arr = np.asarray(rows)
                for j, k in enumerate(ks):
                    report.means[(task, name, k)] = float(arr[:, j].mean())
                if keep_details:
                    for qi, row in enumerate(rows):
                        for j, k in enumerate(ks):
                            report.details.append((task, qi, name, k, row[j]))
    finally:
        if pool:
            pool.shutdown()
    return report


def split_validation(queries: Sequence, val_fraction: float = 0.2, seed: int = 0, use_all: bool = False):
    """
    Seeded split of (singleton) queries into ``(train_side, validation)``.

    With ``use_all`` every query is used for validation.
    """
    queries = list(queries)
    if use_all:
        return queries, queries
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(queries))
    nval = max(1, int(round(val_fraction * len(queries))))
    val = sorted(perm[:nval].tolist())
    rest = sorted(perm[nval:].tolist())
    return [queries[i] for i in rest], [queries[i] for i in val]
