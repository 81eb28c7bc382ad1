# %% [markdown]
# # Building a query benchmark and scoring methods on it
#
# Candidate queries come from attribute co-occurrence in the ground truth. A
# pair is kept when it co-occurs more than chance (lift), neither attribute
# nearly contains the other, and the result set has a usable size.

# %%
import numpy as np

from boxquery.benchmark import GenCriteria, estimate_completeness, generate_queries
from boxquery.boxmodel import rank_items_box
from boxquery.evalharness import LookupRanker, evaluate
from boxquery.synthetic import venn_world
from boxquery.training import TrainConfig, fit
from boxquery.vecmodel import ALGEBRAIC, PROBABILISTIC, rank_items_vec

world = venn_world(m=400, n=12, drop=0.3, side=(0.2, 0.9), seed=1)
bench = generate_queries(world.truth, GenCriteria(lift_min=1.0))
for task, count in bench.counts().items():
    print(f"{task:>20}: {count:4d} queries")
print("mean rho", {t: round(r, 3) for t, r in bench.mean_rho().items()})

# %% [markdown]
# The lookup baseline answers straight from the observed matrix. It can only
# miss items, never invent them, so its precision at small k is hard to beat
# on intersections.

# %%
shared = dict(dims=32, batch_size=32, learning_rate=1.0, neg_items=1, neg_attrs=1, seed=0)
vec = fit(world.observed, TrainConfig(epochs=200, loss_kind="crossEntropy", **shared)).model
box = fit(world.observed, TrainConfig(epochs=200, loss_kind="boxBce", beta=0.1, tau=1.0, **shared)).model
methods = {
    "Lookup": LookupRanker(world.observed),
    "Vector(probabilistic)": lambda q, k: rank_items_vec(vec, q, PROBABILISTIC, k),
    "Vector(algebraic)": lambda q, k: rank_items_vec(vec, q, ALGEBRAIC, k),
    "Box": lambda q, k: rank_items_box(box, q, k),
}
print(evaluate(methods, bench.eval_tasks(), ks=(1, 10)).to_text())

# %% [markdown]
# Capture-recapture: treating the two matrices as independent samples of the
# true pairs gives an estimate of how much each one misses.

# %%
rep = estimate_completeness(world.truth, world.observed, min_overlap=5)
print(f"estimated completeness: truth {rep.completeness_o:.2f}, observed {rep.completeness_o_prime:.2f}")
print("actual observed fraction", world.observed.nnz / world.truth.nnz)
