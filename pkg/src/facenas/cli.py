"""``facenas`` command line: one subcommand per pipeline stage.

Exit status: 0 success, 2 usage error, 3 malformed config, 4 missing file,
5 invalid input data, 6 training or search diverged, 1 anything else.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys

import numpy as np

from .autodiff import NonFiniteError
from .autodiff.checkpoint import CheckpointError
from .cells import DiscreteArch
from .config import ConfigError
from .databench import (
    adjacent_pairs,
    direction_means,
    load_dataset,
    probe_fa_pairwise,
    probe_fe_levels,
    write_matrix_csv,
    write_table_csv,
)
from .pipeline import (
    RunConfig,
    build_detector,
    dataset_floors,
    eval_model,
    evolve_supernet,
    gen_data,
    genome_model,
    load_model,
    load_supernet,
    run_pipeline,
    save_model,
    save_supernet,
    train_model,
    write_report,
)
from .rng import make_rng, sub_seed
from .scale import ArchGenome, Supernet, measure_latency, train_supernet, write_history
from .search import SearchDiverged, compare_fe_positions, run_search

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_CONFIG, EXIT_MISSING, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3, 4, 5, 6
OUTPUT_ROOT_ENV = "FACENAS_OUTPUT_ROOT"


class UsageError(Exception):
    pass


def output_root() -> str:
    return os.environ.get(OUTPUT_ROOT_ENV, "facenas-out")


def out_path(args, default_name: str) -> str:
    path = args.out or os.path.join(output_root(), default_name)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return path


def out_dir(args, default_name: str) -> str:
    path = args.out or os.path.join(output_root(), default_name)
    os.makedirs(path, exist_ok=True)
    return path


def require_file(path, what: str):
    if path is None:
        raise UsageError(f"missing required {what}")
    if not os.path.exists(path):
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


def load_config(args) -> RunConfig:
    cfg = RunConfig.load(require_file(args.config, "config file")) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.replace("run", seed=args.seed)
    if args.jobs is not None:
        if args.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        cfg = cfg.replace("run", jobs=args.jobs)
    return cfg


def with_epochs(schedule, epochs):
    return schedule if epochs is None else dataclasses.replace(schedule, epochs=epochs)


def load_data(path, what="dataset"):
    require_file(path, what)
    return load_dataset(path)


def say(msg):
    print(msg, file=sys.stderr, flush=True)


# commands


def cmd_gen_data(args, cfg):
    if args.n < 1:
        raise UsageError("--n must be positive")
    spec = cfg.scene_for(args.split)
    path = out_dir(args, os.path.join("data", args.split))
    gen_data(spec, args.n, path, cfg.run.jobs)
    say(f"wrote {args.n} images to {path}")


def cmd_probe_fa(args, cfg):
    train, val = load_data(args.train, "training set"), load_data(args.val, "validation set")
    sched = with_epochs(cfg.train_schedule, args.epochs)
    n = len(cfg.detector.levels)
    pairs = adjacent_pairs(n) if args.pairs == "adjacent" else None
    mats = []
    for k in range(args.seeds):
        matrix, errors = probe_fa_pairwise(train, val, sched, seed=sub_seed(cfg.run.seed, "probe-fa", k),
                                           pairs=pairs, width=cfg.model.width, config=cfg.detector)
        for pair, err in errors.items():
            say(f"pair {pair} failed: {err}")
        mats.append(matrix)
    matrix = np.mean(mats, axis=0)
    path = out_path(args, "probe_fa.csv")
    write_matrix_csv(path, matrix, list(cfg.detector.levels))
    td, bu = direction_means(matrix)
    print(json.dumps({"top_down_mean_ap50": td, "bottom_up_mean_ap50": bu, "matrix": path}))


def cmd_probe_fe(args, cfg):
    train, val = load_data(args.train, "training set"), load_data(args.val, "validation set")
    modules = tuple(m.strip() for m in args.modules.split(","))
    table = probe_fe_levels(train, val, with_epochs(cfg.train_schedule, args.epochs), modules=modules,
                            seed=sub_seed(cfg.run.seed, "probe-fe"), width=cfg.model.width, config=cfg.detector)
    path = out_path(args, "probe_fe.csv")
    write_table_csv(path, table)
    say(f"wrote {path}")


def search_kwargs(cfg):
    s = cfg.search
    return dict(width=s.width, opset=s.opset, num_nodes=s.num_nodes, config=cfg.detector, fa_kernel=s.fa_kernel)


def search_schedule(args, cfg):
    sched = with_epochs(cfg.search_schedule, args.epochs)
    if args.seeds is not None:
        if args.seeds < 1:
            raise UsageError("--seeds must be at least 1")
        sched = dataclasses.replace(sched, seeds=tuple(range(args.seeds)))
    return dataclasses.replace(sched, seeds=tuple(sub_seed(cfg.run.seed, "search", s) % 2 ** 31 for s in sched.seeds))


def cmd_search(args, cfg):
    data = load_data(args.data)
    path = out_dir(args, "search")
    res = run_search(args.target or cfg.search.target, data, search_schedule(args, cfg),
                     fe_position=args.fe_position or cfg.search.fe_position, out_dir=path, **search_kwargs(cfg))
    for r in res.runs:
        say(f"seed {r.seed}: mini-val AP.50 {r.minival_ap50:.4f}" + (f" ({r.error})" if r.error else ""))
    print(os.path.join(path, f"arch_{res.target}.json"))


def cmd_compare_fe_pos(args, cfg):
    data = load_data(args.data)
    path = out_dir(args, "fe_positions")
    rows = compare_fe_positions(data, search_schedule(args, cfg), out_dir=path, **search_kwargs(cfg))
    table = os.path.join(path, "fe_positions.csv")
    with open(table, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["rank", "fe_position", "minival_ap50", "minival_ap", "seed"],
                           lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    print(table)


def cmd_train_supernet(args, cfg):
    data = load_data(args.data)
    arch = DiscreteArch.load(require_file(args.arch, "architecture file"))
    sn = Supernet(arch, cfg.space, cfg.detector).initialize(make_rng(cfg.run.seed, "supernet", "init"))
    path = out_path(args, "supernet.ckpt")
    log_path = path + ".log.jsonl"
    with open(log_path, "w") as log:
        def record(rec):
            log.write(json.dumps(rec, sort_keys=True) + "\n")
            say(f"epoch {rec['epoch']} {rec['phase']} loss {rec['loss']:.4f}")
        train_supernet(sn, data, with_epochs(cfg.supernet, args.epochs), make_rng(cfg.run.seed, "supernet", "train"),
                       log=record)
    save_supernet(path, sn)
    print(path)


def cmd_evolve(args, cfg):
    sn = load_supernet(require_file(args.supernet, "supernet checkpoint"))
    data = load_data(args.data, "mini-val set")
    settings = cfg.evolution
    if args.budget_ms is not None:
        settings = dataclasses.replace(settings, budget_ms=args.budget_ms)
    if args.generations is not None:
        settings = dataclasses.replace(settings, iters=args.generations)
    minival = data.subset(range(min(settings.n_minival, len(data))))
    res = evolve_supernet(sn, minival, settings, make_rng(cfg.run.seed, "evolve"),
                          progress=lambda r: say(f"generation {r['generation']}: best {r['best']} "
                                                 f"AP.50 {r['best_fitness']:.4f}"))
    path = out_dir(args, "evolution")
    write_history(os.path.join(path, "history.csv"), res.history)
    best = {"genome": str(res.best), "fitness": res.best_fitness, "record": res.best.to_dict(),
            "budget_ms": settings.budget_ms, "best_per_generation": res.best_per_generation}
    with open(os.path.join(path, "best.json"), "w") as fh:
        json.dump(best, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(str(res.best))


def cmd_train_final(args, cfg):
    data = load_data(args.data)
    modes = [args.baseline, args.arch is not None, args.genome is not None]
    if sum(modes) != 1:
        raise UsageError("give exactly one of --arch, --baseline or --genome")
    schedule = with_epochs(cfg.train_schedule, args.epochs)
    init, arch, genome = None, None, None
    if args.genome is not None:
        genome = ArchGenome.parse(args.genome)
        sn = load_supernet(require_file(args.supernet, "supernet checkpoint"))
        det, init = genome_model(sn, genome, args.fine_tune)
        arch = sn.arch
    else:
        if args.arch is not None:
            arch = DiscreteArch.load(require_file(args.arch, "architecture file"))
        det = build_detector(cfg, arch)
    name = "genome" if genome else "autofae" if arch else "baseline"
    path = out_path(args, f"{name}.ckpt")
    params = train_model(det, data, schedule, sub_seed(cfg.run.seed, "final"), name,
                         log_path=path + ".log.jsonl", init=init)
    save_model(path, det, params, arch, genome)
    print(path)


def cmd_eval(args, cfg):
    det, params = load_model(require_file(args.model, "model checkpoint"))
    data = load_data(args.data)
    report = eval_model(det, params, data, dataset_floors(args.data, cfg.scene))
    path = out_path(args, "report.json")
    write_report(path, report)
    print(report.dumps())


def cmd_bench_latency(args, cfg):
    if args.runs < 11:
        raise UsageError("--runs must be at least 11")
    sn = load_supernet(require_file(args.supernet, "supernet checkpoint"))
    genomes = [ArchGenome.parse(g) for g in args.genome] if args.genome else sn.full_genomes()
    rows = []
    for g in genomes:
        rep = measure_latency(g, sn, n_runs=args.runs)
        rows.append(dataclasses.asdict(rep))
        if rep.resolution_warning:
            say(f"{g}: median below 100x timer resolution")
    print(json.dumps(rows, indent=1))


def cmd_pipeline(args, cfg):
    path = out_dir(args, "pipeline")
    res = run_pipeline(cfg, path, progress=say)
    print(json.dumps({"report": os.path.join(path, "report.json"), "margin_ap50": res.margin_ap50}))


# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration (INI)")
    common.add_argument("--seed", type=int, help="global seed (overrides the config)")
    common.add_argument("--jobs", type=int, help="worker cap for parallel stages")
    common.add_argument("--out", help=f"output path (default under ${OUTPUT_ROOT_ENV} or ./facenas-out)")

    parser = argparse.ArgumentParser(prog="facenas", description="Searchable face-detector necks at desk scale.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=func)
        return p

    p = add("gen-data", cmd_gen_data, "render a synthetic face dataset")
    p.add_argument("--n", type=int, required=True, help="number of images")
    p.add_argument("--split", default="train", help="split name; selects the data sub-seed")

    for name, func, what in (("probe-fa", cmd_probe_fa, "pairwise aggregation probe"),
                             ("probe-fe", cmd_probe_fe, "per-level enhancement probe")):
        p = add(name, func, what)
        p.add_argument("--train", required=True)
        p.add_argument("--val", required=True)
        p.add_argument("--epochs", type=int)
        if name == "probe-fa":
            p.add_argument("--pairs", choices=("adjacent", "all"), default="adjacent")
            p.add_argument("--seeds", type=int, default=1)
        else:
            p.add_argument("--modules", default="none,aspp,rfe")

    for name, func, what in (("search", cmd_search, "differentiable neck search"),
                             ("compare-fe-pos", cmd_compare_fe_pos, "joint search at each FE position")):
        p = add(name, func, what)
        p.add_argument("--data", required=True)
        p.add_argument("--seeds", type=int)
        p.add_argument("--epochs", type=int)
        if name == "search":
            p.add_argument("--target", choices=("joint", "fa", "fe"))
            p.add_argument("--fe-position", choices=("before", "middle", "after"))

    p = add("train-supernet", cmd_train_supernet, "single-path supernet training")
    p.add_argument("--data", required=True)
    p.add_argument("--arch", required=True)
    p.add_argument("--epochs", type=int)

    p = add("evolve", cmd_evolve, "latency-constrained evolution over supernet paths")
    p.add_argument("--supernet", required=True)
    p.add_argument("--data", required=True, help="mini-val dataset")
    p.add_argument("--budget-ms", type=float)
    p.add_argument("--generations", type=int)

    p = add("train-final", cmd_train_final, "train a final detector")
    p.add_argument("--data", required=True)
    p.add_argument("--arch")
    p.add_argument("--baseline", action="store_true", help="identity neck")
    p.add_argument("--genome")
    p.add_argument("--supernet")
    p.add_argument("--fine-tune", action="store_true", help="start a genome from its supernet slice")
    p.add_argument("--epochs", type=int)

    p = add("eval", cmd_eval, "evaluate a trained detector")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)

    p = add("bench-latency", cmd_bench_latency, "wall-clock latency of supernet paths")
    p.add_argument("--supernet", required=True)
    p.add_argument("--genome", action="append")
    p.add_argument("--runs", type=int, default=21)

    add("pipeline", cmd_pipeline, "data, search, final training and evaluation from one config")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    try:
        cfg = load_config(args)
        args.func(args, cfg)
        return EXIT_OK
    except UsageError as exc:
        say(f"facenas {args.command}: usage error: {exc}")
        return EXIT_USAGE
    except ConfigError as exc:
        say(f"facenas {args.command}: bad config: {exc}")
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        say(f"facenas {args.command}: missing file: {exc}")
        return EXIT_MISSING
    except (SearchDiverged, NonFiniteError) as exc:
        say(f"facenas {args.command}: diverged: {exc}")
        return EXIT_DIVERGED
    except (CheckpointError, ValueError, KeyError) as exc:
        say(f"facenas {args.command}: invalid input: {exc}")
        return EXIT_DATA
    except Exception as exc:  # last-resort diagnostic
        say(f"facenas {args.command}: error: {type(exc).__name__}: {exc}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
