"""
Box embedding model: containment scores and inclusion-exclusion composition.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .boxgeom import (BoxTensor, GumbelParams, containment_prob, intersect_gumbel,
                      log_gumbel_volume)
from .core import Query
from .vecmodel import top_k

MAX_NEGATIONS = 12


class TooManyNegationsError(ValueError):
    pass


@dataclass
class BoxModel:
    item_mins: np.ndarray
    item_maxs: np.ndarray
    attr_mins: np.ndarray
    attr_maxs: np.ndarray
    temps: GumbelParams

    def __post_init__(self):
        for name in ("item_mins", "item_maxs", "attr_mins", "attr_maxs"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if self.item_mins.shape != self.item_maxs.shape or self.attr_mins.shape != self.attr_maxs.shape:
            raise ValueError("min and max tables must have equal shapes")
        if self.item_mins.ndim != 2 or self.attr_mins.ndim != 2 or self.item_mins.shape[1] != self.attr_mins.shape[1]:
            raise ValueError("item and attribute boxes must share dimension")

    @property
    def dim(self) -> int:
        return self.item_mins.shape[1]

    @property
    def m(self) -> int:
        return self.item_mins.shape[0]

    @property
    def n(self) -> int:
        return self.attr_mins.shape[0]

    def item_box(self, i) -> BoxTensor:
        return BoxTensor(self.item_mins[i], self.item_maxs[i])

    def attr_box(self, a) -> BoxTensor:
        return BoxTensor(self.attr_mins[a], self.attr_maxs[a])

    def items(self) -> BoxTensor:
        return BoxTensor(self.item_mins, self.item_maxs)

    def copy(self) -> "BoxModel":
        return BoxModel(self.item_mins.copy(), self.item_maxs.copy(),
                        self.attr_mins.copy(), self.attr_maxs.copy(), self.temps)


def _check(model: BoxModel, q: Query | None = None, i=None):
    if i is not None and not 0 <= i < model.m:
        raise IndexError(f"item index {i} out of range")
    if q is not None:
        for lit in q.literals:
            if not 0 <= lit.attribute < model.n:
                raise IndexError(f"attribute index {lit.attribute} out of range")


def score_single_box(model: BoxModel, a: int, i: int) -> float:
    _check(model, i=i)
    if not 0 <= a < model.n:
        raise IndexError(f"attribute index {a} out of range")
    return float(containment_prob(model.attr_box(a), model.item_box(i), model.temps))


def _compositional(model: BoxModel, q: Query, items: BoxTensor) -> np.ndarray:
    negs = sorted(q.negatives)
    if len(negs) > MAX_NEGATIONS:
        raise TooManyNegationsError(f"{len(negs)} negated literals (limit {MAX_NEGATIONS})")
    p = model.temps
    base = None
    for a in sorted(q.positives):
        base = model.attr_box(a) if base is None else intersect_gumbel(base, model.attr_box(a), p)
    base = intersect_gumbel(base, items, p)
    log_item_vol = log_gumbel_volume(items, p)

    total = np.exp(log_gumbel_volume(base, p) - log_item_vol)
    for size in range(1, len(negs) + 1):
        sign = -1.0 if size % 2 else 1.0
        for subset in combinations(negs, size):
            box = base
            for a in subset:
                box = intersect_gumbel(box, model.attr_box(a), p)
            total = total + sign * np.exp(log_gumbel_volume(box, p) - log_item_vol)
    return total


def score_compositional_box(model: BoxModel, q: Query, i: int, clamp: bool = True) -> float:
    """
    Inclusion-exclusion score of item ``i`` for ``q``.

    The positives (sorted by attribute index) and the item box are folded into
    one intersection ``B``; each subset ``S`` of the negated attributes then
    contributes ``(-1)^|S| |B ∩ ⋂S| / |item|``.  With ``clamp=False`` the raw
    signed sum is returned.
    """
    _check(model, q, i)
    val = float(_compositional(model, q, model.item_box(i)))
    return min(max(val, 0.0), 1.0) if clamp else val


def scores_box(model: BoxModel, q: Query, clamp: bool = True) -> np.ndarray:
    "Compositional scores of every item for ``q``."
    _check(model, q)
    vals = _compositional(model, q, model.items())
    return np.clip(vals, 0.0, 1.0) if clamp else vals


def rank_items_box(model: BoxModel, q: Query, k: int) -> list[int]:
    return top_k(scores_box(model, q), k)


def predict_set_box(model: BoxModel, q: Query, threshold: float = 0.5) -> np.ndarray:
    return np.flatnonzero(scores_box(model, q) > threshold)
