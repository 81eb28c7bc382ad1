"""
Matrix-factorization vector model and its two compositional heuristics.

Score aggregation treats sigmoid scores as independent probabilities;
embedding aggregation adds positive and subtracts negated attribute vectors
before taking the dot product.  Neither normalizes the composed vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .core import Query

IDENTITY = "identity"
SIGMOID = "sigmoid"

PROBABILISTIC = "probabilistic"
ALGEBRAIC = "algebraic"


class UnsupportedTransformError(ValueError):
    pass


@dataclass
class VectorModel:
    item_vecs: np.ndarray
    attr_vecs: np.ndarray
    transform: str = SIGMOID

    def __post_init__(self):
        self.item_vecs = np.asarray(self.item_vecs, dtype=np.float64)
        self.attr_vecs = np.asarray(self.attr_vecs, dtype=np.float64)
        if self.transform not in (IDENTITY, SIGMOID):
            raise ValueError(f"unknown transform {self.transform!r}")
        if self.item_vecs.ndim != 2 or self.attr_vecs.ndim != 2 or self.item_vecs.shape[1] != self.attr_vecs.shape[1]:
            raise ValueError("item and attribute tables must be 2-d with equal width")

    @property
    def dim(self) -> int:
        return self.item_vecs.shape[1]

    @property
    def m(self) -> int:
        return self.item_vecs.shape[0]

    @property
    def n(self) -> int:
        return self.attr_vecs.shape[0]

    def phi(self, x):
        return expit(x) if self.transform == SIGMOID else np.asarray(x, dtype=np.float64)

    def copy(self) -> "VectorModel":
        return VectorModel(self.item_vecs.copy(), self.attr_vecs.copy(), self.transform)


def _check_item(model, i):
    if not 0 <= i < model.m:
        raise IndexError(f"item index {i} out of range")


def _check_query(model, q: Query):
    for lit in q.literals:
        if not 0 <= lit.attribute < model.n:
            raise IndexError(f"attribute index {lit.attribute} out of range")


def score_single(model: VectorModel, a: int, i: int) -> float:
    _check_item(model, i)
    if not 0 <= a < model.n:
        raise IndexError(f"attribute index {a} out of range")
    return float(model.phi(model.item_vecs[i] @ model.attr_vecs[a]))


def scores_probabilistic(model: VectorModel, q: Query) -> np.ndarray:
    "Score-aggregation scores of every item for ``q``."
    if model.transform != SIGMOID:
        raise UnsupportedTransformError("score aggregation needs sigmoid scores in [0, 1]")
    _check_query(model, q)
    attrs = [lit.attribute for lit in q.literals]
    probs = expit(model.item_vecs @ model.attr_vecs[attrs].T)
    for j, lit in enumerate(q.literals):
        if lit.negated:
            probs[:, j] = 1.0 - probs[:, j]
    return np.prod(probs, axis=1)


def score_probabilistic(model: VectorModel, q: Query, i: int) -> float:
    if model.transform != SIGMOID:
        raise UnsupportedTransformError("score aggregation needs sigmoid scores in [0, 1]")
    _check_item(model, i)
    _check_query(model, q)
    out = 1.0
    for lit in q.literals:
        s = float(expit(model.item_vecs[i] @ model.attr_vecs[lit.attribute]))
        out *= (1.0 - s) if lit.negated else s
    return out


def query_vector(model: VectorModel, q: Query) -> np.ndarray:
    _check_query(model, q)
    vec = np.zeros(model.dim)
    for lit in q.literals:
        if lit.negated:
            vec -= model.attr_vecs[lit.attribute]
        else:
            vec += model.attr_vecs[lit.attribute]
    return vec


def scores_algebraic(model: VectorModel, q: Query) -> np.ndarray:
    return model.phi(model.item_vecs @ query_vector(model, q))


def score_algebraic(model: VectorModel, q: Query, i: int) -> float:
    _check_item(model, i)
    return float(model.phi(model.item_vecs[i] @ query_vector(model, q)))


def scores_vec(model: VectorModel, q: Query, strategy: str) -> np.ndarray:
    if strategy == PROBABILISTIC:
        return scores_probabilistic(model, q)
    elif strategy == ALGEBRAIC:
        return scores_algebraic(model, q)
    raise ValueError(f"unknown strategy {strategy!r}")


def top_k(scores: np.ndarray, k: int) -> list[int]:
    """
    Indices of the ``k`` highest scores, ties broken by ascending index.
    """
    scores = np.asarray(scores)
    if k < 0 or k > len(scores):
        raise ValueError(f"k={k} outside [0, {len(scores)}]")
    if k == 0:
        return []
    # lexsort: last key is primary
    order = np.lexsort((np.arange(len(scores)), -scores))
    return order[:k].tolist()


def rank_items_vec(model: VectorModel, q: Query, strategy: str, k: int) -> list[int]:
    return top_k(scores_vec(model, q, strategy), k)


def predict_set(model: VectorModel, q: Query, strategy: str = ALGEBRAIC,
                threshold: float | None = None) -> np.ndarray:
    """Items whose score exceeds ``threshold`` (0.5 for sigmoid, 0 for identity)."""
    if threshold is None:
        threshold = 0.5 if model.transform == SIGMOID else 0.0
    return np.flatnonzero(scores_vec(model, q, strategy) > threshold)
