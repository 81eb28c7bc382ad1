# %% [markdown]
# # Training on a synthetic world
#
# Items are points in the unit square and attributes are rectangles, so the
# true item sets have real overlaps and differences. We train on a copy with
# 30% of the memberships deleted, which stands in for sparse user tags.

# %%
import time

import numpy as np

from boxquery.synthetic import venn_world
from boxquery.training import TrainConfig, fit

world = venn_world(m=300, n=10, drop=0.3, side=(0.2, 0.9), seed=0)
print("true pairs", world.truth.nnz, "observed pairs", world.observed.nnz)

# %% [markdown]
# Both models get the same parameter budget: 32 numbers per entity means
# 32-d vectors or 16-d boxes.

# %%
shared = dict(dims=32, batch_size=32, learning_rate=1.0, neg_items=1, neg_attrs=1, seed=0)
t0 = time.perf_counter()
vec = fit(world.observed, TrainConfig(epochs=200, loss_kind="crossEntropy", **shared))
print(f"vector: {time.perf_counter() - t0:.1f} s, loss {vec.epoch_losses[0]:.3f} -> {vec.epoch_losses[-1]:.3f}")
t0 = time.perf_counter()
box = fit(world.observed, TrainConfig(epochs=200, loss_kind="boxBce", beta=0.1, tau=1.0, **shared))
print(f"box:    {time.perf_counter() - t0:.1f} s, loss {box.epoch_losses[0]:.3f} -> {box.epoch_losses[-1]:.3f}")

# %% [markdown]
# Scores on true memberships that were deleted from training should still
# rank above non-members. The rank AUC below is the chance that a random
# hidden member outscores a random non-member of the same attribute pool.

# %%
from scipy.stats import rankdata

from boxquery.boxmodel import scores_box
from boxquery.core import Query
from boxquery.vecmodel import PROBABILISTIC, scores_vec

truth = world.truth.matrix.toarray().astype(bool)
seen = world.observed.matrix.toarray().astype(bool)
hidden = truth & ~seen


def auc(pos, neg):
    r = rankdata(np.r_[pos, neg])
    return (r[:len(pos)].sum() - len(pos) * (len(pos) + 1) / 2) / (len(pos) * len(neg))


for name, score in (("vector", lambda a: scores_vec(vec.model, Query.of(a), PROBABILISTIC)),
                    ("box", lambda a: scores_box(box.model, Query.of(a)))):
    s = np.column_stack([score(a) for a in range(world.truth.shape[1])])
    print(f"{name:>6}: AUC hidden members vs non-members {auc(s[hidden], s[~truth]):.3f}")
