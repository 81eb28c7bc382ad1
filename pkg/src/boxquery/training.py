"""
Negative-sampling SGD for vector and box models, and random hyperparameter search.

Every nonzero entry of the noisy matrix is a positive (label 1) visited once
per epoch in shuffled order.  Each positive brings ``neg_items`` corrupted
items and ``neg_attrs`` corrupted attributes as label-0 examples; collisions
with other observed pairs are not filtered.  Gradients are analytic and
sparse: only rows touched by a batch are returned and updated.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import expit

from .boxgeom import BoxTensor, GumbelParams, containment_prob_grad
from .boxmodel import BoxModel, rank_items_box
from .core import ObservationMatrix, Query
from .evalharness import precision_at_k
from .vecmodel import IDENTITY, SIGMOID, VectorModel, rank_items_vec, ALGEBRAIC

_log = logging.getLogger(__name__)

HINGE = "hinge"
CROSS_ENTROPY = "crossEntropy"
BOX_BCE = "boxBce"
LOSS_KINDS = (HINGE, CROSS_ENTROPY, BOX_BCE)

VECTOR = "vector"
BOX = "box"


class TrainingDivergedError(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    epochs: int
    loss_kind: str
    dims: int = 100
    batch_size: int = 1024
    learning_rate: float = 1.0
    reg_coeff: float = 0.0
    neg_items: int = 1
    neg_attrs: int = 1
    margin: float = 1.0
    seed: int = 0
    beta: float = 0.001
    tau: float = 1.0

    def __post_init__(self):
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.loss_kind!r}")
        for name in ("epochs", "batch_size", "neg_items", "neg_attrs", "dims"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.batch_size < 1 or self.dims < 1:
            raise ValueError("batch_size and dims must be positive")
        # zero is allowed and means "no update"
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.reg_coeff < 0:
            raise ValueError("reg_coeff must be nonnegative")
        GumbelParams(self.beta, self.tau)

    @property
    def transform(self) -> str | None:
        return {HINGE: IDENTITY, CROSS_ENTROPY: SIGMOID}.get(self.loss_kind)

    @property
    def temps(self) -> GumbelParams:
        return GumbelParams(self.beta, self.tau)

    @property
    def kind(self) -> str:
        return BOX if self.loss_kind == BOX_BCE else VECTOR

    @property
    def box_dims(self) -> int:
        "Box dimension with the same parameter count as ``dims``-dimensional vectors."
        return max(1, self.dims // 2)

    def to_text(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)}\n" for f in dataclasses.fields(self))

    @classmethod
    def from_text(cls, text: str) -> "TrainConfig":
        return cls(**_parse_kv(text))


_CASTS = {"int": int, "float": float, "str": str}


def _cast(field_name: str, value: str):
    ftype = {f.name: f.type for f in dataclasses.fields(TrainConfig)}.get(field_name)
    if ftype is None:
        raise ValueError(f"unknown config key {field_name!r}")
    if ftype == "int":
        return int(float(value)) if "e" in value.lower() else int(value)
    return _CASTS[ftype](value)


def _parse_kv(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = _cast(key, value)
    return out


class TrainingExample(NamedTuple):
    item: int
    attribute: int
    label: int
    weight: float = 1.0


class Batch(NamedTuple):
    items: np.ndarray
    attrs: np.ndarray
    labels: np.ndarray

    @classmethod
    def of(cls, examples: Sequence[TrainingExample]) -> "Batch":
        return cls(np.array([e.item for e in examples], dtype=np.int64),
                   np.array([e.attribute for e in examples], dtype=np.int64),
                   np.array([e.label for e in examples], dtype=np.float64))


def _draw_other(rng: np.random.Generator, size: int, exclude: np.ndarray) -> np.ndarray:
    "Uniform draws from ``range(size)`` that differ from ``exclude`` elementwise."
    r = rng.integers(0, size - 1, size=exclude.shape)
    return r + (r >= exclude)


def negatives_for(items: np.ndarray, attrs: np.ndarray, neg_items: int, neg_attrs: int,
                  m: int, n: int, rng: np.random.Generator) -> Batch:
    """
    Corrupted examples for a batch of positives.

    For each positive, ``neg_items`` replacement items come first, then
    ``neg_attrs`` replacement attributes; the output is ordered positive by
    positive.
    """
    k = len(items)
    parts_i, parts_a = [], []
    if neg_items:
        if m < 2:
            raise ValueError("need at least two items to sample negatives")
        parts_i.append(_draw_other(rng, m, np.repeat(items[:, None], neg_items, axis=1)))
        parts_a.append(np.repeat(attrs[:, None], neg_items, axis=1))
    if neg_attrs:
        if n < 2:
            raise ValueError("need at least two attributes to sample negatives")
        parts_a.append(_draw_other(rng, n, np.repeat(attrs[:, None], neg_attrs, axis=1)))
        parts_i.append(np.repeat(items[:, None], neg_attrs, axis=1))
    if not parts_i:
        empty = np.zeros(0, dtype=np.int64)
        return Batch(empty, empty, np.zeros(0))
    ni = np.concatenate(parts_i, axis=1).reshape(-1)
    na = np.concatenate(parts_a, axis=1).reshape(-1)
    assert len(ni) == k * (neg_items + neg_attrs)
    return Batch(ni, na, np.zeros(len(ni)))


def sample_negatives(positive: tuple[int, int], cfg: TrainConfig, rng: np.random.Generator,
                     m: int, n: int) -> list[TrainingExample]:
    i, a = positive
    b = negatives_for(np.array([i]), np.array([a]), cfg.neg_items, cfg.neg_attrs, m, n, rng)
    return [TrainingExample(int(x), int(y), 0, 1.0) for x, y in zip(b.items, b.attrs)]


class VectorGrads(NamedTuple):
    item_rows: np.ndarray
    item_grad: np.ndarray
    attr_rows: np.ndarray
    attr_grad: np.ndarray


class BoxGrads(NamedTuple):
    item_rows: np.ndarray
    item_dmin: np.ndarray
    item_dmax: np.ndarray
    attr_rows: np.ndarray
    attr_dmin: np.ndarray
    attr_dmax: np.ndarray


def _scatter(rows: np.ndarray, values: np.ndarray):
    uniq, inv = np.unique(rows, return_inverse=True)
    out = np.zeros((len(uniq),) + values.shape[1:])
    np.add.at(out, inv, values)
    return uniq, out


def loss_and_grads_vector(model: VectorModel, batch: Batch, cfg: TrainConfig) -> tuple[float, VectorGrads]:
    """
    Mean hinge or cross-entropy loss plus L2 on the touched rows.

    Hinge (identity transform) uses ``max(0, margin - s * dot)`` with
    ``s = +1`` for positives and ``-1`` for negatives.
    """
    if cfg.loss_kind not in (HINGE, CROSS_ENTROPY) or cfg.transform != model.transform:
        raise ValueError(f"loss {cfg.loss_kind!r} does not match transform {model.transform!r}")
    U = model.item_vecs[batch.items]
    V = model.attr_vecs[batch.attrs]
    dots = np.einsum("ij,ij->i", U, V)
    y = batch.labels
    N = len(y)
    if cfg.loss_kind == HINGE:
        s = 2.0 * y - 1.0
        slack = cfg.margin - s * dots
        terms = np.maximum(0.0, slack)
        dterm = np.where(slack > 0, -s, 0.0)
    else:
        terms = np.logaddexp(0.0, dots) - y * dots
        dterm = expit(dots) - y

    item_rows, item_grad = _scatter(batch.items, (dterm / N)[:, None] * V)
    attr_rows, attr_grad = _scatter(batch.attrs, (dterm / N)[:, None] * U)
    loss = float(np.mean(terms)) if N else 0.0
    if cfg.reg_coeff:
        iu = model.item_vecs[item_rows]
        av = model.attr_vecs[attr_rows]
        loss += cfg.reg_coeff * float(np.sum(iu * iu) + np.sum(av * av))
        item_grad += 2.0 * cfg.reg_coeff * iu
        attr_grad += 2.0 * cfg.reg_coeff * av
    return loss, VectorGrads(item_rows, item_grad, attr_rows, attr_grad)


def loss_and_grads_box(model: BoxModel, batch: Batch, cfg: TrainConfig) -> tuple[float, BoxGrads]:
    """
    Mean binary cross entropy between labels and ``P(attribute | item)``.
    """
    if cfg.loss_kind != BOX_BCE:
        raise ValueError(f"box model needs loss {BOX_BCE!r}, got {cfg.loss_kind!r}")
    outer = BoxTensor(model.attr_mins[batch.attrs], model.attr_maxs[batch.attrs])
    inner = BoxTensor(model.item_mins[batch.items], model.item_maxs[batch.items])
    prob, d_omin, d_omax, d_imin, d_imax = containment_prob_grad(outer, inner, model.temps)
    y = batch.labels
    N = len(y)
    terms = -(y * np.log(prob) + (1.0 - y) * np.log1p(-prob))
    dprob = (-y / prob + (1.0 - y) / (1.0 - prob)) / max(N, 1)
    dp = dprob[:, None]
    attr_rows, attr_dmin = _scatter(batch.attrs, dp * d_omin)
    _, attr_dmax = _scatter(batch.attrs, dp * d_omax)
    item_rows, item_dmin = _scatter(batch.items, dp * d_imin)
    _, item_dmax = _scatter(batch.items, dp * d_imax)
    loss = float(np.mean(terms)) if N else 0.0
    return loss, BoxGrads(item_rows, item_dmin, item_dmax, attr_rows, attr_dmin, attr_dmax)


def init_vector_model(m: int, n: int, cfg: TrainConfig, rng: np.random.Generator) -> VectorModel:
    d = cfg.dims
    bound = 0.5 / np.sqrt(d)
    U = rng.uniform(-bound, bound, size=(m, d))
    V = rng.uniform(-bound, bound, size=(n, d))
    return VectorModel(U, V, cfg.transform)


def _init_boxes(count: int, d: int, rng: np.random.Generator):
    mins = rng.uniform(-0.4, 0.1, size=(count, d))
    return mins, mins + rng.uniform(0.2, 0.6, size=(count, d))


def init_box_model(m: int, n: int, cfg: TrainConfig, rng: np.random.Generator) -> BoxModel:
    d = cfg.box_dims
    imin, imax = _init_boxes(m, d, rng)
    amin, amax = _init_boxes(n, d, rng)
    return BoxModel(imin, imax, amin, amax, cfg.temps)


@dataclass
class TrainResult:
    model: VectorModel | BoxModel
    epoch_losses: list[float] = field(default_factory=list)
    config: TrainConfig | None = None

    def log_tsv(self) -> str:
        return "".join(f"{e}\t{loss!r}\n" for e, loss in enumerate(self.epoch_losses, 1))


def _apply_vector(model: VectorModel, g: VectorGrads, lr: float):
    model.item_vecs[g.item_rows] -= lr * g.item_grad
    model.attr_vecs[g.attr_rows] -= lr * g.attr_grad


def _apply_box(model: BoxModel, g: BoxGrads, lr: float):
    model.item_mins[g.item_rows] -= lr * g.item_dmin
    model.item_maxs[g.item_rows] -= lr * g.item_dmax
    model.attr_mins[g.attr_rows] -= lr * g.attr_dmin
    model.attr_maxs[g.attr_rows] -= lr * g.attr_dmax


def fit(data: ObservationMatrix, cfg: TrainConfig, kind: str | None = None,
        rng: np.random.Generator | None = None, init=None) -> TrainResult:
    """
    Train a vector or box model with plain minibatch SGD.

    ``kind`` defaults to the one implied by ``cfg.loss_kind``.  ``rng``
    defaults to a generator seeded from ``cfg.seed``; it drives
    initialization, shuffling and negative sampling, so a fixed seed fixes the
    whole trajectory.  Raises :class:`TrainingDivergedError` if an epoch's
    mean loss is not finite.
    """
    kind = kind or cfg.kind
    if kind != cfg.kind:
        raise ValueError(f"loss {cfg.loss_kind!r} cannot train a {kind} model")
    if data.nnz == 0:
        raise ValueError("no observations to train on")
    if kind == BOX and cfg.reg_coeff:
        _log.warning("reg_coeff is ignored by the box loss")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    m, n = data.shape
    if init is not None:
        model = init.copy()
    elif kind == BOX:
        model = init_box_model(m, n, cfg, rng)
    else:
        model = init_vector_model(m, n, cfg, rng)
    step = loss_and_grads_box if kind == BOX else loss_and_grads_vector
    apply = _apply_box if kind == BOX else _apply_vector

    pos_items, pos_attrs, _ = data.pairs()
    npos = len(pos_items)
    result = TrainResult(model, [], cfg)
    for epoch in range(cfg.epochs):
        order = rng.permutation(npos)
        total, count = 0.0, 0
        for start in range(0, npos, cfg.batch_size):
            sel = order[start:start + cfg.batch_size]
            pi, pa = pos_items[sel], pos_attrs[sel]
            neg = negatives_for(pi, pa, cfg.neg_items, cfg.neg_attrs, m, n, rng)
            batch = Batch(np.concatenate([pi, neg.items]), np.concatenate([pa, neg.attrs]),
                          np.concatenate([np.ones(len(pi)), neg.labels]))
            loss, grads = step(model, batch, cfg)
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss in epoch {epoch + 1}")
            if cfg.learning_rate:
                apply(model, grads, cfg.learning_rate)
            total += loss * len(batch.items)
            count += len(batch.items)
        mean = total / count
        if not np.isfinite(mean):
            raise TrainingDivergedError(f"non-finite loss in epoch {epoch + 1}")
        result.epoch_losses.append(mean)
        _log.debug("epoch %d: mean loss %.6f", epoch + 1, mean)
    return result


# random search

# default candidate lists
SEARCH_SPACE = {
    "batch_size": [128, 256, 512, 1024],
    "learning_rate": [1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0],
    "reg_coeff": [1e-4, 1e-3, 1e-2],
}
BOX_SEARCH_SPACE = {
    "beta": [1e-4, 1e-3, 1e-2, 1.0],
    "tau": [0.1, 0.5, 1.0],
}


@dataclass
class HyperGrid:
    """
    Candidate values per config field; fields not in ``space`` come from ``base``.

    Trials are scored by precision@1 on singleton validation queries.
    """

    base: TrainConfig
    space: dict[str, list] = field(default_factory=dict)
    trials: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        known = {f.name for f in dataclasses.fields(TrainConfig)}
        for key, values in self.space.items():
            if key not in known:
                raise ValueError(f"unknown grid key {key!r}")
            if not values:
                raise ValueError(f"empty candidate list for {key!r}")

    @classmethod
    def standard(cls, kind: str, epochs: int, trials: int = 20, seed: int = 0) -> "HyperGrid":
        space = dict(SEARCH_SPACE)
        if kind == BOX:
            # the box loss carries no L2 term
            del space["reg_coeff"]
            space.update(BOX_SEARCH_SPACE)
            base = TrainConfig(epochs=epochs, loss_kind=BOX_BCE, dims=100, neg_items=50, neg_attrs=20)
        else:
            space["loss_kind"] = [HINGE, CROSS_ENTROPY]
            base = TrainConfig(epochs=epochs, loss_kind=HINGE, dims=100, neg_items=50, neg_attrs=20)
        return cls(base, space, trials, seed)

    def sample(self, rng: np.random.Generator) -> TrainConfig:
        values = {}
        for key in sorted(self.space):
            cands = self.space[key]
            values[key] = cands[int(rng.integers(len(cands)))]
        return dataclasses.replace(self.base, **values)

    @classmethod
    def from_text(cls, text: str) -> "HyperGrid":
        """
        Parse ``key=v1,v2,...`` lines.  ``trials`` and ``seed`` set the search
        itself; single-valued keys go into the base config, lists into the space.
        """
        base, space, trials, seed = {}, {}, 1, 0
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key == "trials":
                trials = int(value)
            elif key == "seed":
                seed = int(value)
            else:
                vals = [_cast(key, v.strip()) for v in value.split(",") if v.strip()]
                if len(vals) == 1:
                    base[key] = vals[0]
                else:
                    space[key] = vals
        for key in list(space):
            base.setdefault(key, space[key][0])
        return cls(TrainConfig(**base), space, trials, seed)


Ranker = Callable[[Query, int], list]


def ranker_for(model, strategy: str | None = None) -> Ranker:
    if isinstance(model, BoxModel):
        return lambda q, k: rank_items_box(model, q, k)
    return lambda q, k: rank_items_vec(model, q, strategy or ALGEBRAIC, k)


def validation_p1(model, val_queries: Sequence[tuple[Query, frozenset]]) -> float:
    rank = ranker_for(model)
    return float(np.mean([precision_at_k(rank(q, 1), truth, 1) for q, truth in val_queries]))


@dataclass
class SearchResult:
    config: TrainConfig
    model: VectorModel | BoxModel
    score: float
    trials: list[tuple[TrainConfig, float | None]]


def random_search(data: ObservationMatrix, grid: HyperGrid,
                  val_queries: Sequence[tuple[Query, frozenset]], kind: str | None = None) -> SearchResult:
    """
    Train ``grid.trials`` sampled configs and keep the best by validation P@1.

    Trials that diverge are recorded with score ``None``; ties go to the
    earlier trial.  Trial ``t`` trains with seed ``base.seed + t``.
    """
    if not val_queries:
        raise ValueError("need validation queries")
    if any(len(q) != 1 or q.negatives for q, _ in val_queries):
        raise ValueError("validation queries must be singletons")
    kind = kind or grid.base.kind
    rng = np.random.default_rng(grid.seed)
    best = None
    log = []
    for t in range(grid.trials):
        cfg = grid.sample(rng)
        cfg = dataclasses.replace(cfg, seed=grid.base.seed + t)
        try:
            res = fit(data, cfg, kind)
        except (TrainingDivergedError, FloatingPointError, ValueError) as e:
            _log.warning("trial %d failed: %s", t, e)
            log.append((cfg, None))
            continue
        score = validation_p1(res.model, val_queries)
        _log.info("trial %d: P@1 %.4f", t, score)
        log.append((cfg, score))
        if best is None or score > best.score:
            best = SearchResult(cfg, res.model, score, log)
    if best is None:
        raise TrainingDivergedError("every search trial failed")
    best.trials = log
    return best
