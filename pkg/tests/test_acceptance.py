"""
Acceptance checks.  Each test prints one ``PASS``/``FAIL`` line with the
measured value next to its tolerance, then asserts.

Data-dependent checks need ``--data-dir DIR`` holding ``tags.tsv``,
``genres.tsv``, optionally ``genre_hierarchy.tsv``, and the released query
set as ``benchmark.jsonl``.  The full reproduction additionally needs
``--run-slow``.
"""
import time
from itertools import combinations
from pathlib import Path

import mpmath
import numpy as np
import pytest
from scipy.special import expit

from boxquery.benchmark import GenCriteria, QueryBenchmark, estimate_completeness, generate_queries
from boxquery.boxgeom import (BoxTensor, GumbelParams, containment_prob, gumbel_volume, hard_volume,
                              intersect_gumbel, intersect_hard)
from boxquery.boxmodel import BoxModel, rank_items_box, score_compositional_box
from boxquery.core import (GROUND_TRUTH, NOISY, ObservationMatrix, Query, build_catalog, expand_with_hierarchy,
                           ground_truth_match, hierarchy_from_named, matrix_from_named, read_hierarchy_pairs,
                           read_pairs, rho)
from boxquery.evalharness import (DIFFERENCE, INTERSECTION, SINGLETON, TASKS, LookupRanker, evaluate,
                                  precision_at_k, split_validation)
from boxquery.synthetic import venn_world
from boxquery.training import (BOX, BOX_BCE, CROSS_ENTROPY, HINGE, VECTOR, Batch, HyperGrid, TrainConfig,
                               fit, loss_and_grads_box, loss_and_grads_vector, random_search)
from boxquery.vecmodel import ALGEBRAIC, PROBABILISTIC, SIGMOID, VectorModel, rank_items_vec, scores_probabilistic


def report(capsys, name, ok, detail):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'}  {name}: {detail}")


def need_data(data_dir, *names):
    if data_dir is None:
        pytest.skip("needs --data-dir")
    root = Path(data_dir)
    missing = [n for n in names if not (root / n).exists()]
    if missing:
        pytest.skip(f"missing {', '.join(missing)} in {root}")
    return root


# ---- geometry ---------------------------------------------------------------------

mpmath.mp.dps = 30


def mp_softplus(x, tau):
    return tau * mpmath.log1p(mpmath.exp(x / tau))


def mp_lse(a, b, beta):
    hi = max(a, b)
    return hi + beta * mpmath.log1p(mpmath.exp(-abs(a - b) / beta))


def geometry_errors(rng, d, count=1000):
    "Worst relative error of the four box operations against 30-digit evaluation."
    mins_a = rng.uniform(1.0, 2.0, (count, d))
    mins_b = rng.uniform(1.0, 2.0, (count, d))
    maxs_a = mins_a + rng.uniform(0.05, 2.0, (count, d))
    maxs_b = mins_b + rng.uniform(0.05, 2.0, (count, d))
    betas = 10 ** rng.uniform(-3, 0, count)
    taus = 10 ** rng.uniform(-2, 0.3, count)
    a, b = BoxTensor(mins_a, maxs_a), BoxTensor(mins_b, maxs_b)

    t0 = time.perf_counter()
    hv = hard_volume(a)
    hi = intersect_hard(a, b)
    gv = np.empty(count)
    gi_mins, gi_maxs = np.empty((count, d)), np.empty((count, d))
    for r in range(count):
        p = GumbelParams(betas[r], taus[r])
        gv[r] = gumbel_volume(BoxTensor(mins_a[r], maxs_a[r]), p)
        box = intersect_gumbel(BoxTensor(mins_a[r], maxs_a[r]), BoxTensor(mins_b[r], maxs_b[r]), p)
        gi_mins[r], gi_maxs[r] = box.mins, box.maxs
    lib_time = time.perf_counter() - t0

    worst = 0.0
    rel = lambda got, ref: abs(mpmath.mpf(float(got)) - ref) / abs(ref)
    for r in range(count):
        beta, tau = mpmath.mpf(betas[r]), mpmath.mpf(taus[r])
        hard_ref, soft_ref = mpmath.mpf(1), mpmath.mpf(1)
        for j in range(d):
            lo, up = mpmath.mpf(mins_a[r, j]), mpmath.mpf(maxs_a[r, j])
            hard_ref *= up - lo
            soft_ref *= mp_softplus(up - lo, tau)
            lo_b, up_b = mpmath.mpf(mins_b[r, j]), mpmath.mpf(maxs_b[r, j])
            worst = max(worst, rel(gi_mins[r, j], mp_lse(lo, lo_b, beta)),
                        rel(gi_maxs[r, j], -mp_lse(-up, -up_b, beta)),
                        rel(hi.mins[r, j], max(lo, lo_b)), rel(hi.maxs[r, j], min(up, up_b)))
        worst = max(worst, rel(hv[r], hard_ref), rel(gv[r], soft_ref))
    return float(worst), lib_time


def test_geometry_exactness(capsys):
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    worst, lib = 0.0, 0.0
    for d in (1, 2, 5, 50):
        w, t = geometry_errors(rng, d)
        worst, lib = max(worst, w), lib + t
    total = time.perf_counter() - t0
    ok = worst < 1e-9 and lib < 5.0
    report(capsys, "geometry exactness", ok,
           f"max rel err {worst:.2e} (< 1e-9); library time {lib:.2f} s (< 5 s), with oracle {total:.1f} s")
    assert worst < 1e-9
    assert lib < 5.0


# ---- gradients ----------------------------------------------------------------------

def fd_rel_error(loss_fn, tables, grads, rows):
    worst = 0.0
    base = abs(loss_fn())
    for table, grad, idx in zip(tables, grads, rows):
        for r_ix, r in enumerate(idx):
            for c in range(table.shape[1]):
                old = table[r, c]
                h = 1e-5 * max(1.0, abs(old))
                table[r, c] = old + h
                up = loss_fn()
                table[r, c] = old - h
                dn = loss_fn()
                table[r, c] = old
                num = (up - dn) / (2 * h)
                an = grad[r_ix, c]
                worst = max(worst, abs(an - num) / max(abs(an), abs(num), 1e-7 * max(base, 1e-12)))
    return worst


def gradient_draws(kind, rng, draws=100):
    worst = 0.0
    done = 0
    while done < draws:
        d = int(rng.integers(1, 6))
        batch = Batch(rng.integers(0, 6, 5), rng.integers(0, 4, 5), rng.integers(0, 2, 5).astype(float))
        if kind == BOX_BCE:
            p = GumbelParams(float(rng.uniform(0.05, 1)), float(rng.uniform(0.1, 2)))
            cfg = TrainConfig(epochs=1, loss_kind=kind, beta=p.beta, tau=p.tau)
            im, am = rng.normal(0, 0.5, (6, d)), rng.normal(0, 0.5, (4, d))
            model = BoxModel(im, im + rng.uniform(0.1, 1.5, (6, d)), am, am + rng.uniform(0.1, 1.5, (4, d)), p)
            probs = containment_prob(BoxTensor(model.attr_mins[batch.attrs], model.attr_maxs[batch.attrs]),
                                     BoxTensor(model.item_mins[batch.items], model.item_maxs[batch.items]),
                                     p, clamp=False)
            # the clamp has a zero derivative that differencing across it would miss
            if probs.min() < 1e-5 or probs.max() > 1 - 1e-5:
                continue
            fn = lambda: loss_and_grads_box(model, batch, cfg)[0]
            _, g = loss_and_grads_box(model, batch, cfg)
            err = fd_rel_error(fn, [model.item_mins, model.item_maxs, model.attr_mins, model.attr_maxs],
                               [g.item_dmin, g.item_dmax, g.attr_dmin, g.attr_dmax],
                               [g.item_rows, g.item_rows, g.attr_rows, g.attr_rows])
        else:
            cfg = TrainConfig(epochs=1, loss_kind=kind, reg_coeff=float(rng.choice([0.0, 1e-2])))
            model = VectorModel(rng.normal(size=(6, d)), rng.normal(size=(4, d)), cfg.transform)
            if kind == HINGE:
                dots = np.einsum("ij,ij->i", model.item_vecs[batch.items], model.attr_vecs[batch.attrs])
                if np.min(np.abs(cfg.margin - (2 * batch.labels - 1) * dots)) <= 1e-3:
                    continue
            fn = lambda: loss_and_grads_vector(model, batch, cfg)[0]
            _, g = loss_and_grads_vector(model, batch, cfg)
            err = fd_rel_error(fn, [model.item_vecs, model.attr_vecs], [g.item_grad, g.attr_grad],
                               [g.item_rows, g.attr_rows])
        worst = max(worst, err)
        done += 1
    return worst


def test_gradient_suite(capsys):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    errs = {kind: gradient_draws(kind, rng) for kind in (HINGE, CROSS_ENTROPY, BOX_BCE)}
    elapsed = time.perf_counter() - t0
    ok = max(errs.values()) < 1e-3 and elapsed < 30
    detail = ", ".join(f"{k} {v:.1e}" for k, v in errs.items())
    report(capsys, "gradient suite", ok, f"max rel err {detail} (< 1e-3); {elapsed:.1f} s (< 30 s)")
    assert max(errs.values()) < 1e-3
    assert elapsed < 30


# ---- small temperature limit ------------------------------------------------------

def test_limit_suite(capsys):
    rng = np.random.default_rng(2)
    p = GumbelParams(1e-4, 1e-4)
    worst = {"volume": 0.0, "intersection": 0.0, "containment": 0.0}
    for d in (1, 2, 5):
        for _ in range(300):
            lo_a, lo_b = rng.uniform(-1, 1, d), rng.uniform(-1, 1, d)
            a = BoxTensor(lo_a, lo_a + rng.uniform(0.5, 1.5, d))
            b = BoxTensor(lo_b, lo_b + rng.uniform(0.5, 1.5, d))
            worst["volume"] = max(worst["volume"], abs(gumbel_volume(a, p) - hard_volume(a)))
            soft, hard = intersect_gumbel(a, b, p), intersect_hard(a, b)
            worst["intersection"] = max(worst["intersection"], np.abs(soft.mins - hard.mins).max(),
                                        np.abs(soft.maxs - hard.maxs).max())
            hard_c = hard_volume(intersect_hard(a, b)) / hard_volume(b)
            worst["containment"] = max(worst["containment"], abs(containment_prob(a, b, p, clamp=False) - hard_c))
    ok = max(worst.values()) < 1e-3
    report(capsys, "limit suite", ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + " (< 1e-3)")
    assert ok


# ---- inclusion-exclusion --------------------------------------------------------------

def test_inclusion_exclusion(capsys):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        d = int(rng.integers(1, 6))
        im, am = rng.normal(0, 0.5, (1, d)), rng.normal(0, 0.5, (2, d))
        temps = GumbelParams(rng.uniform(0.05, 0.5), rng.uniform(0.1, 1.0))
        model = BoxModel(im, im + rng.uniform(0.1, 1.0, (1, d)), am, am + rng.uniform(0.2, 2.0, (2, d)), temps)
        both = score_compositional_box(model, Query.of(0, 1), 0, clamp=False)
        minus = score_compositional_box(model, Query.of(0, negate=[1]), 0, clamp=False)
        single = score_compositional_box(model, Query.of(0), 0, clamp=False)
        worst = max(worst, abs(both + minus - single))
    # probabilistic vectors: the negated literal scores exactly 1 - sigma
    vm = VectorModel(rng.normal(size=(200, 8)), rng.normal(size=(3, 8)), SIGMOID)
    s = expit(vm.item_vecs @ vm.attr_vecs.T)
    exact = np.array_equal(scores_probabilistic(vm, Query.of(0, negate=[1])), s[:, 0] * (1.0 - s[:, 1]))
    ok = worst < 1e-9 and exact
    report(capsys, "inclusion-exclusion", ok,
           f"box max |lhs - rhs| {worst:.1e} (< 1e-9); vector complement exact: {exact}")
    assert worst < 1e-9
    assert exact


# ---- brute-force oracles -----------------------------------------------------------------

def random_instance(rng):
    m, n = int(rng.integers(5, 101)), int(rng.integers(2, 11))
    base = rng.uniform(size=m)
    cols = []
    for _ in range(n):
        c, w = rng.uniform(), rng.uniform(0.05, 0.7)
        cols.append(set(np.flatnonzero((np.abs(base - c) < w / 2) | (rng.uniform(size=m) < 0.05)).tolist()))
    pairs = [(i, a) for a, col in enumerate(cols) for i in col]
    return m, cols, ObservationMatrix.from_pairs(pairs, (m, n), GROUND_TRUTH)


def brute_match(q, cols, m):
    out = set(range(m))
    for lit in q.literals:
        out &= (set(range(m)) - cols[lit.attribute]) if lit.negated else cols[lit.attribute]
    return out


def brute_rho(q, cols, m):
    atoms = [len(set(range(m)) - cols[l.attribute]) if l.negated else len(cols[l.attribute]) for l in q.literals]
    return len(brute_match(q, cols, m)) / min(atoms)


def brute_p_at_k(ranked, truth, k):
    return sum(1 for x in list(ranked)[:k] if x in truth) / k


def brute_generation(cols, m, crit):
    max_res = m // 2
    universe = set(range(m))
    atom = lambda a, neg: universe - cols[a] if neg else cols[a]

    def accept(lits):
        res = set(universe)
        for a, neg in lits:
            res &= atom(a, neg)
        sizes = [len(atom(a, neg)) for a, neg in lits]
        expected = np.prod(sizes, dtype=float) / m ** (len(lits) - 1)
        return (len(res) >= crit.lift_min * expected and len(res) <= crit.contain_max * min(sizes)
                and crit.min_result <= len(res) <= max_res)

    n = len(cols)
    got = {SINGLETON: [Query.of(a) for a in range(n) if len(cols[a]) >= crit.min_result]}
    pairs = [(a, b) for a, b in combinations(range(n), 2) if accept([(a, False), (b, False)])]
    got[INTERSECTION] = [Query.of(a, b) for a, b in pairs]
    got[DIFFERENCE] = [Query.of(a, negate=[b]) for a in range(n) for b in range(n)
                       if a != b and accept([(a, False), (b, True)])]
    got["tripleIntersection"] = [Query.of(a, b, c) for a, b in pairs for c in range(b + 1, n)
                                 if accept([(a, False), (b, False), (c, False)])]
    got["tripleDifference"] = [Query.of(a, b, negate=[c]) for a, b in pairs for c in range(n)
                               if c not in (a, b) and accept([(a, False), (b, False), (c, True)])]
    return got


def test_oracle_equivalence(capsys):
    rng = np.random.default_rng(4)
    mismatches = {"ground_truth_match": 0, "rho": 0, "precision_at_k": 0, "generate_queries": 0}
    checked = 0
    for _ in range(200):
        m, cols, o = random_instance(rng)
        n = len(cols)
        for _ in range(10):
            size = int(rng.integers(1, min(n, 3) + 1))
            attrs = rng.choice(n, size, replace=False).tolist()
            neg = attrs[1:][: int(rng.integers(0, size))]
            q = Query.of(*[a for a in attrs if a not in neg], negate=neg)
            truth = brute_match(q, cols, m)
            mismatches["ground_truth_match"] += ground_truth_match(q, o) != truth
            atoms = [len(set(range(m)) - cols[l.attribute]) if l.negated else len(cols[l.attribute]) for l in q.literals]
            if min(atoms):
                mismatches["rho"] += rho(q, o) != brute_rho(q, cols, m)
            ranked = rng.permutation(m).tolist()
            for k in (1, 5, 10):
                mismatches["precision_at_k"] += precision_at_k(ranked, frozenset(truth), k) != brute_p_at_k(ranked, truth, k)
            checked += 1
        crit = GenCriteria(lift_min=float(rng.choice([1.0, 1.5])), min_result=int(rng.integers(1, 10)))
        bench = generate_queries(o, crit)
        ref = brute_generation(cols, m, crit)
        for task, queries in ref.items():
            got = [bq.query for bq in bench.tasks[task]]
            mismatches["generate_queries"] += got != queries
    ok = not any(mismatches.values())
    report(capsys, "oracle equivalence", ok,
           f"{checked} queries on 200 instances (<= 100 x 10); mismatches {mismatches} (0)")
    assert ok


# ---- synthetic Venn world -----------------------------------------------------------------

# One shared recipe fixed before looking at results.  Dimensions follow the
# parity rule (100-d vectors, 50-d boxes); the rest is sized to train well
# inside five minutes on one core.
VENN_VECTOR = TrainConfig(epochs=300, loss_kind=CROSS_ENTROPY, dims=100, batch_size=32, learning_rate=1.0,
                          neg_items=1, neg_attrs=1)
VENN_BOX = TrainConfig(epochs=400, loss_kind=BOX_BCE, dims=100, batch_size=32, learning_rate=1.0,
                       neg_items=1, neg_attrs=1, beta=0.1, tau=1.0)
VENN_BUDGET = 300.0


def venn_seed(seed):
    world = venn_world(m=1000, n=20, drop=0.3, side=(0.2, 0.9), seed=seed)
    bench = generate_queries(world.truth, GenCriteria(lift_min=1.0))
    tasks = {t: q for t, q in bench.eval_tasks().items() if t in (INTERSECTION, DIFFERENCE)}
    t0 = time.perf_counter()
    vec = fit(world.observed, TrainConfig(**{**VENN_VECTOR.__dict__, "seed": seed})).model
    t_vec = time.perf_counter() - t0
    t0 = time.perf_counter()
    box = fit(world.observed, TrainConfig(**{**VENN_BOX.__dict__, "seed": seed})).model
    t_box = time.perf_counter() - t0
    methods = {"lookup": LookupRanker(world.observed),
               "vector(probabilistic)": lambda q, k: rank_items_vec(vec, q, PROBABILISTIC, k),
               "vector(algebraic)": lambda q, k: rank_items_vec(vec, q, ALGEBRAIC, k),
               "box": lambda q, k: rank_items_box(box, q, k)}
    rep = evaluate(methods, tasks, ks=(10,))
    return rep, max(t_vec, t_box)


@pytest.mark.slow
def test_synthetic_venn(capsys):
    reps, slowest = [], 0.0
    for seed in range(3):
        rep, t = venn_seed(seed)
        reps.append(rep)
        slowest = max(slowest, t)
    mean = lambda task, method: float(np.mean([r.get(task, method, 10) for r in reps]))
    diff = {m: mean(DIFFERENCE, m) for m in reps[0].methods}
    inter = {m: mean(INTERSECTION, m) for m in reps[0].methods}
    ok_a = diff["box"] > max(diff["vector(probabilistic)"], diff["vector(algebraic)"])
    ok_b = inter["box"] >= inter["lookup"]
    ok_t = slowest <= VENN_BUDGET
    counts = [(r.counts.get(INTERSECTION, 0), r.counts.get(DIFFERENCE, 0)) for r in reps]
    report(capsys, "synthetic Venn (a) difference P@10", ok_a,
           "box {box:.4f} vs vector(probabilistic) {vector(probabilistic):.4f}, vector(algebraic) "
           "{vector(algebraic):.4f} (box strictly greater)".format(**diff))
    report(capsys, "synthetic Venn (b) intersection P@10", ok_b,
           f"box {inter['box']:.4f} vs lookup {inter['lookup']:.4f} (box >= lookup)")
    report(capsys, "synthetic Venn training budget", ok_t,
           f"slowest model {slowest:.0f} s (<= {VENN_BUDGET:.0f} s); queries per seed (int, diff) {counts}")
    assert ok_t
    assert ok_a
    assert ok_b


# ---- released benchmark and real data ------------------------------------------------------

TABLE_COUNTS = {SINGLETON: 218, INTERSECTION: 556, DIFFERENCE: 149, "tripleIntersection": 1604,
                "tripleDifference": 302}
TABLE_RHO = {SINGLETON: 1.0, INTERSECTION: 0.142, DIFFERENCE: 0.785, "tripleIntersection": 0.054,
             "tripleDifference": 0.277}


def load_real(root):
    tags = read_pairs(root / "tags.tsv")
    genres = read_pairs(root / "genres.tsv")
    hier_path = root / "genre_hierarchy.tsv"
    hier = read_hierarchy_pairs(hier_path) if hier_path.exists() else []
    catalog = build_catalog(tags, genres, hierarchy=hier)
    o_prime = matrix_from_named(tags, catalog, NOISY)
    o = matrix_from_named(genres, catalog, GROUND_TRUTH)
    if hier:
        o = expand_with_hierarchy(o, hierarchy_from_named(hier, catalog))
    return catalog, o, o_prime, tags, genres


def test_released_benchmark(capsys, data_dir):
    root = need_data(data_dir, "tags.tsv", "genres.tsv", "benchmark.jsonl")
    catalog, o, *_ = load_real(root)
    bench = QueryBenchmark.load(root / "benchmark.jsonl", catalog, o)
    counts, rhos = bench.counts(), bench.mean_rho()
    ok_counts = counts == TABLE_COUNTS
    rho_gap = {t: abs(rhos.get(t, np.nan) - TABLE_RHO[t]) for t in TASKS}
    ok_rho = all(g <= 0.01 for g in rho_gap.values())
    report(capsys, "released benchmark counts", ok_counts, f"{counts} (exactly {TABLE_COUNTS})")
    report(capsys, "released benchmark mean rho", ok_rho,
           ", ".join(f"{t} {rhos.get(t, float('nan')):.3f}" for t in TASKS) + " (within 0.01 of table)")
    assert ok_counts
    assert ok_rho


def test_completeness(capsys, data_dir):
    o1 = ObservationMatrix.from_pairs([(i, 0) for i in range(10)], (100, 1), GROUND_TRUTH)
    p1 = ObservationMatrix.from_pairs([(i, 0) for i in range(6, 12)], (100, 1), NOISY)
    o2 = ObservationMatrix.from_pairs([(i, 0) for i in range(5)], (100, 1), GROUND_TRUTH)
    p2 = ObservationMatrix.from_pairs([(i, 0) for i in range(10)], (100, 1), NOISY)
    r1 = estimate_completeness(o1, p1, min_overlap=1).rows[0]
    r2 = estimate_completeness(o2, p2, min_overlap=1).rows[0]
    got = (r1.est_true, r1.completeness_o, r1.completeness_o_prime, r2.est_true, r2.completeness_o,
           r2.completeness_o_prime)
    want = (15.0, 10 / 15, 6 / 15, 10.0, 0.5, 1.0)
    ok = got == want
    report(capsys, "completeness fixtures", ok, f"{got} (exactly {want})")
    assert ok


def test_completeness_real(capsys, data_dir):
    root = need_data(data_dir, "tags.tsv", "genres.tsv")
    _, o, o_prime, *_ = load_real(root)
    rep = estimate_completeness(o, o_prime, min_overlap=5)
    ok = 0.5 <= rep.completeness_o <= 0.7
    report(capsys, "completeness on real data", ok,
           f"genre completeness {rep.completeness_o:.3f} over {len(rep.rows)} genres (in [0.50, 0.70])")
    assert ok


# ---- full reproduction ----------------------------------------------------------------

@pytest.mark.slow
def test_full_reproduction(capsys, data_dir, request):
    if not request.config.getoption("--run-slow"):
        pytest.skip("needs --run-slow")
    root = need_data(data_dir, "tags.tsv", "genres.tsv", "benchmark.jsonl")
    catalog, o, o_prime, tags, genres = load_real(root)
    tag_items = len({p[0] for p in tags})
    tag_attrs = len({p[1] for p in tags})
    genre_items = len({p[0] for p in genres})
    genre_attrs = len({p[1] for p in genres})
    stats = (tag_items, tag_attrs, o_prime.nnz, genre_items, genre_attrs, o.nnz)
    ok_stats = stats == (19545, 35169, 195878, 25878, 218, 83670)
    report(capsys, "full reproduction ingest counts", ok_stats,
           f"{stats} (exactly (19545, 35169, 195878, 25878, 218, 83670))")

    bench = QueryBenchmark.load(root / "benchmark.jsonl", catalog, o)
    val, _ = split_validation(bench.eval_tasks()[SINGLETON], 0.2, seed=0)
    models = {}
    for kind in (VECTOR, BOX):
        grid = HyperGrid.standard(kind, epochs=20)
        models[kind] = random_search(o_prime, grid, val, kind).model
    vec, box = models[VECTOR], models[BOX]
    methods = {"lookup": LookupRanker(o_prime), "box": lambda q, k: rank_items_box(box, q, k)}
    if vec.transform == SIGMOID:
        methods["vector(probabilistic)"] = lambda q, k: rank_items_vec(vec, q, PROBABILISTIC, k)
    methods["vector(algebraic)"] = lambda q, k: rank_items_vec(vec, q, ALGEBRAIC, k)
    rep = evaluate(methods, bench.eval_tasks(), ks=(1, 10))
    compositional = [t for t in rep.counts if t != SINGLETON]
    losers = [(t, m) for t in compositional for m in methods if m != "box"
              and rep.get(t, "box", 10) < rep.get(t, m, 10)]
    p1 = [rep.get(SINGLETON, m, 1) for m in methods]
    spread = max(p1) - min(p1)
    ok_order = not losers
    ok_single = spread <= 0.05
    report(capsys, "full reproduction compositional ordering", ok_order,
           f"cells where box trails at P@10: {losers or 'none'} (none)")
    report(capsys, "full reproduction singleton spread", ok_single, f"P@1 spread {spread:.3f} (<= 0.05)")
    assert ok_stats and ok_order and ok_single
