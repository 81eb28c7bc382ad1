"""
Command-line entry point.

Subcommands: ``ingest``, ``train``, ``search``, ``query``, ``genbench``,
``eval`` and ``completeness``.  Every file written gets a sibling
``<file>.manifest.json`` recording the command, configuration, input hashes,
seed, version and wall time; the outputs themselves carry no timestamps.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical divergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, checkpoint
from .benchmark import GenCriteria, QueryBenchmark, estimate_completeness, generate_queries
from .boxmodel import BoxModel, scores_box
from .core import (GROUND_TRUTH, NOISY, DataFormatError, EntityCatalog, ObservationMatrix, QueryError,
                   build_catalog, expand_with_hierarchy, file_digest, hierarchy_from_named, matrix_from_named,
                   parse_query, read_hierarchy_pairs, read_pairs)
from .evalharness import DEFAULT_KS, SINGLETON, LookupRanker, evaluate, split_validation
from .training import BOX, VECTOR, HyperGrid, TrainConfig, TrainingDivergedError, fit, random_search
from .vecmodel import ALGEBRAIC, PROBABILISTIC, SIGMOID, rank_items_vec, scores_vec, top_k
from .boxmodel import rank_items_box

_log = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3

BOX_STRATEGY = "box"
GRID_FILES = {VECTOR: "vector_grid.conf", BOX: "box_grid.conf"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---- manifests and shared loading ------------------------------------------------

class Run:
    """Collects input hashes and writes a manifest next to each output."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.start = time.perf_counter()
        self.inputs: dict[str, str] = {}
        self.config: dict = {}

    def read(self, path) -> Path:
        path = Path(path)
        if not path.is_file():
            raise DataFormatError(path, 0, "no such file")
        self.inputs[str(path)] = file_digest(path)
        return path

    def wrote(self, path):
        argv = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(self.args).items() if k != "func"}
        manifest = {"command": self.args.command, "arguments": argv, "config": self.config,
                    "inputs": self.inputs, "seed": self.args.seed, "version": __version__,
                    "wallSeconds": round(time.perf_counter() - self.start, 3)}
        with open(f"{path}.manifest.json", "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
            f.write("\n")


def _catalog(run: Run, path) -> EntityCatalog:
    return EntityCatalog.load(run.read(path))


def _matrix(run: Run, path, catalog: EntityCatalog | None = None) -> ObservationMatrix:
    o = ObservationMatrix.load(run.read(path))
    if catalog is not None and o.shape != (catalog.m, catalog.n):
        raise DataFormatError(path, 0, f"matrix shape {o.shape} does not match the catalog ({catalog.m}, {catalog.n})")
    return o


def _model(run: Run, path, catalog: EntityCatalog):
    model, head = checkpoint.load(run.read(path))
    if head.get("catalogHash") not in (None, catalog.digest()):
        raise DataFormatError(path, 0, "checkpoint was trained on a different catalog")
    if (model.m, model.n) != (catalog.m, catalog.n):
        raise DataFormatError(path, 0, "checkpoint sizes do not match the catalog")
    return model


def _encoding(args) -> str:
    return checkpoint.BINARY if args.format == "binary" else checkpoint.TEXT


def _write_text(run: Run, path, text: str):
    Path(path).write_text(text, encoding="utf-8")
    run.wrote(path)


# ---- commands --------------------------------------------------------------------

def cmd_ingest(args, run: Run):
    if not (args.noisy or args.truth):
        raise UsageError("give --noisy and/or --truth")
    noisy = read_pairs(run.read(args.noisy)) if args.noisy else []
    truth = read_pairs(run.read(args.truth)) if args.truth else []
    hier = read_hierarchy_pairs(run.read(args.hierarchy)) if args.hierarchy else []
    catalog = build_catalog(noisy, truth, hierarchy=hier)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    catalog.save(out / "catalog.json")
    run.wrote(out / "catalog.json")
    print(f"catalog\t{catalog.m}\t{catalog.n}")
    for name, pairs, kind in (("noisy", noisy, NOISY), ("truth", truth, GROUND_TRUTH)):
        if not pairs:
            continue
        o = matrix_from_named(pairs, catalog, kind)
        rows, cols, _ = o.pairs()
        print(f"{name}\t{len(np.unique(rows))}\t{len(np.unique(cols))}\t{o.nnz}")
        if kind == GROUND_TRUTH and hier:
            o = expand_with_hierarchy(o, hierarchy_from_named(hier, catalog))
            print(f"{name}+hierarchy\t{o.nnz}")
        o.save(out / f"{name}.npz")
        run.wrote(out / f"{name}.npz")


def _load_config(args, run: Run) -> TrainConfig:
    cfg = TrainConfig.from_text(run.read(args.config).read_text(encoding="utf-8"))
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def cmd_train(args, run: Run):
    catalog = _catalog(run, args.catalog)
    data = _matrix(run, args.data, catalog)
    cfg = _load_config(args, run)
    if cfg.learning_rate == 0:
        _log.warning("learning_rate is 0: parameters stay at their initialization")
    run.config = dataclasses.asdict(cfg)
    res = fit(data, cfg)
    checkpoint.save(args.out, res.model, catalog.digest(), _encoding(args))
    run.wrote(args.out)
    log = args.log or f"{args.out}.log.tsv"
    _write_text(run, log, "epoch\tmeanLoss\n" + res.log_tsv())
    print(f"trained {cfg.kind} model, final mean loss {res.epoch_losses[-1] if res.epoch_losses else float('nan'):.6f}")


def _grid_text(args, run: Run) -> str:
    if args.grid:
        return run.read(args.grid).read_text(encoding="utf-8")
    return resources.files("boxquery").joinpath("data", GRID_FILES[args.kind]).read_text(encoding="utf-8")


def cmd_search(args, run: Run):
    catalog = _catalog(run, args.catalog)
    data = _matrix(run, args.data, catalog)
    grid = HyperGrid.from_text(_grid_text(args, run))
    if args.seed is not None:
        grid = dataclasses.replace(grid, seed=args.seed, base=dataclasses.replace(grid.base, seed=args.seed))
    if grid.base.kind != args.kind and "loss_kind" not in grid.space:
        raise UsageError(f"grid trains a {grid.base.kind} model but --kind is {args.kind}")
    bench = QueryBenchmark.load(run.read(args.queries), catalog)
    singles = [(bq.query, bq.items) for bq in bench.tasks[SINGLETON]]
    if not singles:
        raise DataFormatError(args.queries, 0, "no singleton queries for validation")
    _, val = split_validation(singles, args.val_fraction, grid.seed, use_all=args.use_all)
    run.config = {"base": dataclasses.asdict(grid.base), "space": grid.space, "trials": grid.trials,
                  "gridSeed": grid.seed, "validationQueries": len(val)}
    res = random_search(data, grid, val, args.kind)
    checkpoint.save(args.out, res.model, catalog.digest(), _encoding(args))
    run.config["best"] = dataclasses.asdict(res.config)
    run.wrote(args.out)
    lines = ["trial\tvalidationP@1\t" + "\t".join(sorted(grid.space))]
    for t, (cfg, score) in enumerate(res.trials):
        vals = "\t".join(str(getattr(cfg, k)) for k in sorted(grid.space))
        lines.append(f"{t}\t{'failed' if score is None else f'{score:.6f}'}\t{vals}")
    _write_text(run, f"{args.out}.search.tsv", "\n".join(lines) + "\n")
    print(f"best validation P@1 {res.score:.4f}")


def _strategy_scores(model, q, strategy):
    if isinstance(model, BoxModel):
        if strategy != BOX_STRATEGY:
            raise UsageError(f"a box checkpoint needs --strategy {BOX_STRATEGY}")
        return scores_box(model, q)
    if strategy == BOX_STRATEGY:
        raise UsageError("a vector checkpoint needs --strategy probabilistic or algebraic")
    return scores_vec(model, q, strategy)


def cmd_query(args, run: Run):
    catalog = _catalog(run, args.catalog)
    model = _model(run, args.checkpoint, catalog)
    strategy = args.strategy or (BOX_STRATEGY if isinstance(model, BoxModel) else ALGEBRAIC)
    q = parse_query(args.query, catalog)
    if not 0 <= args.k <= catalog.m:
        raise UsageError(f"k must lie in [0, {catalog.m}]")
    scores = _strategy_scores(model, q, strategy)
    out = sys.stdout
    for rank, i in enumerate(top_k(scores, args.k), 1):
        out.write(f"{rank}\t{catalog.items[i]}\t{float(scores[i])!r}\n")


def cmd_genbench(args, run: Run):
    catalog = _catalog(run, args.catalog)
    o = _matrix(run, args.truth, catalog).as_ground_truth()
    crit = GenCriteria(args.lift_min, args.contain_max, args.min_result, args.max_result)
    run.config = dataclasses.asdict(crit)
    bench = generate_queries(o, crit)
    bench.write(args.out, catalog)
    run.wrote(args.out)
    counts, rhos = bench.counts(), bench.mean_rho()
    for task, count in counts.items():
        print(f"{task}\t{count}\t{rhos.get(task, float('nan')):.3f}")


def _methods(args, run: Run, catalog: EntityCatalog):
    methods = {}
    if args.noisy:
        methods["Lookup"] = LookupRanker(_matrix(run, args.noisy, catalog))
    for spec in args.checkpoint or []:
        name, _, path = spec.rpartition("=")
        model = _model(run, path, catalog)
        label = name or Path(path).stem
        if isinstance(model, BoxModel):
            methods[label] = (lambda mdl: lambda q, k: rank_items_box(mdl, q, k))(model)
        else:
            strategies = [PROBABILISTIC, ALGEBRAIC] if model.transform == SIGMOID else [ALGEBRAIC]
            for s in strategies:
                methods[f"{label}({s})"] = (lambda mdl, st: lambda q, k: rank_items_vec(mdl, q, st, k))(model, s)
    if not methods:
        raise UsageError("nothing to evaluate: give --noisy and/or --checkpoint")
    return methods


def cmd_eval(args, run: Run):
    catalog = _catalog(run, args.catalog)
    o = _matrix(run, args.truth, catalog).as_ground_truth() if args.truth else None
    bench = QueryBenchmark.load(run.read(args.bench), catalog, o)
    methods = _methods(args, run, catalog)
    ks = tuple(args.k) if args.k else DEFAULT_KS
    report = evaluate(methods, bench.eval_tasks(), ks, threads=args.threads)
    run.config = {"ks": list(ks), "methods": list(methods), "counts": report.counts}
    text = report.to_tsv() if args.format == "tsv" else report.to_text()
    if args.out:
        _write_text(run, args.out, text)
    else:
        sys.stdout.write(text)


def cmd_completeness(args, run: Run):
    catalog = _catalog(run, args.catalog)
    o = _matrix(run, args.truth, catalog)
    o_prime = _matrix(run, args.noisy, catalog)
    report = estimate_completeness(o, o_prime, args.min_overlap)
    run.config = {"min_overlap": args.min_overlap}
    if args.out:
        _write_text(run, args.out, report.to_tsv(catalog))
    print(report.summary())


# ---- argument parsing --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="boxquery", description=__doc__.strip().splitlines()[0])
    p.add_argument("--seed", type=int, default=None, help="overrides the seed in config and grid files")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--format", choices=("text", "tsv", "binary"), default="text",
                   help="report layout (text/tsv) or checkpoint encoding (text/binary)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", help="index TSV observations into a catalog and matrices")
    s.add_argument("--noisy", help="item<TAB>attribute[<TAB>count] lines for the noisy matrix")
    s.add_argument("--truth", help="item<TAB>attribute lines for the ground truth")
    s.add_argument("--hierarchy", help="child<TAB>parent attribute lines")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("train", help="fit one model from a key=value config file")
    s.add_argument("--data", required=True)
    s.add_argument("--catalog", required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--log", help="training log path (default <out>.log.tsv)")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("search", help="random hyperparameter search scored by validation P@1")
    s.add_argument("--data", required=True)
    s.add_argument("--catalog", required=True)
    s.add_argument("--queries", required=True, help="benchmark file providing singleton validation queries")
    s.add_argument("--kind", choices=(VECTOR, BOX), required=True)
    s.add_argument("--grid", help="grid file (default: the packaged grid for --kind)")
    s.add_argument("--val-fraction", type=float, default=0.2)
    s.add_argument("--use-all", action="store_true", help="validate on every singleton query")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_search)

    s = sub.add_parser("query", help="rank items for one query")
    s.add_argument("query")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--catalog", required=True)
    s.add_argument("-k", type=int, default=10)
    s.add_argument("--strategy", choices=(PROBABILISTIC, ALGEBRAIC, BOX_STRATEGY))
    s.set_defaults(func=cmd_query)

    s = sub.add_parser("genbench", help="generate compositional queries from ground truth")
    s.add_argument("--truth", required=True)
    s.add_argument("--catalog", required=True)
    s.add_argument("--out", required=True)
    d = GenCriteria()
    s.add_argument("--lift-min", type=float, default=d.lift_min)
    s.add_argument("--contain-max", type=float, default=d.contain_max)
    s.add_argument("--min-result", type=int, default=d.min_result)
    s.add_argument("--max-result", type=int, default=None, help="default: half the item count")
    s.set_defaults(func=cmd_genbench)

    s = sub.add_parser("eval", help="precision@k of checkpoints and the lookup baseline")
    s.add_argument("--bench", required=True)
    s.add_argument("--catalog", required=True)
    s.add_argument("--truth", help="ground truth matrix (recomputes result ratios)")
    s.add_argument("--noisy", help="noisy matrix for the lookup baseline")
    s.add_argument("--checkpoint", action="append", help="[name=]path, repeatable")
    s.add_argument("-k", type=int, action="append", help="cutoff, repeatable (default 1 10 20 50)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("completeness", help="capture-recapture completeness of two sources")
    s.add_argument("--truth", required=True)
    s.add_argument("--noisy", required=True)
    s.add_argument("--catalog", required=True)
    s.add_argument("--min-overlap", type=int, default=5)
    s.add_argument("--out")
    s.set_defaults(func=cmd_completeness)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    run = Run(args)
    try:
        args.func(args, run)
    except UsageError as e:
        print(f"boxquery {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDivergedError as e:
        print(f"boxquery {args.command}: training diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DataFormatError, QueryError, OSError, KeyError, ValueError) as e:
        print(f"boxquery {args.command}: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
