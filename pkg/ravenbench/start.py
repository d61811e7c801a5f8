"""Command line entry point of Ravenbench

Subcommands:
  generate       write reasoning task instances
  render         draw instances as panel and task sheet PNGs
  eval-metrics   score representations with the disentanglement metrics
  train-wren     train relation networks on representations, write learning curves
  analyze        correlate scores with accuracy, write a report
  ladder         all of the above over an entanglement ladder

Options are taken from the command line, then from the --config YAML file, then from built-in defaults.
"""

import os
import sys
import logging
import argparse
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List

from ravenbench import __NAME__, __version__, __COPYRIGHT__, FORMAT, LOGFILE, Config
from ravenbench.constant import CONFIG_KW, RAVENBENCH_DEFAULT_VALUES, SCORES_FILE, CURVES_FILE, REPORT_FILE, SOURCE_KIND, ID_SEP
from ravenbench.errors import ArtifactExists, GenerationError, RavenbenchError
from ravenbench.factor import make_space, space_ids
from ravenbench.generator import generate_instances, read_instances, write_instances
from ravenbench.render import save_instance_pngs
from ravenbench.sources import source_from_spec, make_entanglement_ladder
from ravenbench.metrics import METRIC_GROUPS, evaluate_metrics, metric_names
from ravenbench.wren import sample_configs, train_wren
from ravenbench.nn import save_params
from ravenbench.analysis import analyze, build_results_table, load_curves, load_scores, write_curves, write_report, write_scores
from ravenbench.manifest import RunManifest, write_manifest

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)

DESC = "Abstract reasoning benchmark for disentangled representations"

GENERATE_CHUNK = 1000  # instances per worker task


# ##########################################
# Options
#
def _dest(kw: CONFIG_KW) -> str:
    return kw.value.replace("-", "_")


def resolve(args: argparse.Namespace, keys: List[CONFIG_KW]) -> dict:
    """Value of each key: command line, else config file, else default"""
    config = Config(filename=args.config) if getattr(args, "config", None) is not None else Config()
    if args.config is not None and not config.is_valid():
        logger.warning(f"config file {args.config} has no values")
    resolved = {}
    for kw in keys:
        value = getattr(args, _dest(kw), None)
        if value is None or value is False:
            value = config.get(kw.value, value if value is False else None)
        if value is None:
            value = RAVENBENCH_DEFAULT_VALUES.get(kw.value)
        resolved[kw.value] = value
    return resolved


def _check_outputs(paths: List[str], force: bool):
    existing = [p for p in paths if os.path.exists(p)]
    if len(existing) > 0 and not force:
        raise ArtifactExists(f"{existing[0]} exists, use --force to overwrite")


def _out_dir(path: str) -> str:
    return os.path.dirname(os.path.abspath(path))


def _parallel(fn: Callable, cells: list, jobs: int) -> list:
    """Results in cell order, whatever the number of workers"""
    if jobs <= 1 or len(cells) <= 1:
        return [fn(cell) for cell in cells]
    with ProcessPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(fn, cells))


# ##########################################
# Worker jobs, module level so that they can be pickled
#
def _generate_job(cell: dict) -> list:
    space = make_space(cell["space"])
    return generate_instances(space, cell["count"], seed=cell["seed"], strict=cell["strict"], start=cell["start"])


def _metrics_job(cell: dict) -> List[dict]:
    space = make_space(cell["space"])
    source = source_from_spec(cell["repr"], space)
    return [score.to_row() for score in evaluate_metrics(source, cell["metrics"], cell["seed"], cell["metric-params"])]


def _train_job(cell: dict) -> List[dict]:
    space = make_space(cell["space"])
    source = source_from_spec(cell["repr"], space)
    config = cell["config"]
    run_id = ID_SEP.join([source.model_id, config.digest(), str(cell["gen-seed"])])
    records, params = train_wren(
        config,
        space,
        source,
        generator_seed=cell["gen-seed"],
        steps=cell["steps"],
        batch=cell["batch"],
        eval_every=cell["eval-every"],
        eval_batches=cell["eval-batches"],
    )
    if cell.get("params-dir") is not None:
        save_params(params.named_arrays(), os.path.join(cell["params-dir"], run_id.replace(ID_SEP, "_")))
    return [{"model_id": run_id, "step": r.step, "accuracy": r.eval_accuracy} for r in records]


def _train_cells(opts: dict, reprs: List[str], params_dir: str | None = None) -> List[dict]:
    configs = sample_configs(opts[CONFIG_KW.CONFIG_SEED.value], opts[CONFIG_KW.WREN_CONFIGS.value], position_tags=not opts[CONFIG_KW.NO_POSITION_TAGS.value])
    seeds = [opts[CONFIG_KW.GEN_SEED.value] + i for i in range(opts[CONFIG_KW.SEEDS.value])]
    cells = []
    for config in configs:
        for spec in reprs:
            for seed in seeds:
                cells.append(
                    {
                        "space": opts[CONFIG_KW.SPACE.value],
                        "repr": spec,
                        "config": config,
                        "gen-seed": seed,
                        "steps": opts[CONFIG_KW.STEPS.value],
                        "batch": opts[CONFIG_KW.BATCH.value],
                        "eval-every": opts[CONFIG_KW.EVAL_EVERY.value],
                        "eval-batches": opts[CONFIG_KW.EVAL_BATCHES.value],
                        "params-dir": params_dir,
                    }
                )
    return cells


# ##########################################
# Commands
#
def cmd_generate(args) -> int:
    opts = resolve(args, [CONFIG_KW.SPACE, CONFIG_KW.COUNT, CONFIG_KW.SEED, CONFIG_KW.STRICT, CONFIG_KW.JOBS, CONFIG_KW.FORCE])
    path = args.out
    _check_outputs([path], opts[CONFIG_KW.FORCE.value])
    manifest = RunManifest(command="generate", config=opts, seeds={"seed": opts[CONFIG_KW.SEED.value]})
    count = opts[CONFIG_KW.COUNT.value]
    cells = [
        {"space": opts[CONFIG_KW.SPACE.value], "count": min(GENERATE_CHUNK, count - start), "seed": opts[CONFIG_KW.SEED.value], "strict": opts[CONFIG_KW.STRICT.value], "start": start}
        for start in range(0, count, GENERATE_CHUNK)
    ]
    logger.info(f"generating {count} instances of {opts[CONFIG_KW.SPACE.value]}..")
    instances = [inst for chunk in _parallel(_generate_job, cells, opts[CONFIG_KW.JOBS.value]) for inst in chunk]
    os.makedirs(_out_dir(path), exist_ok=True)
    write_instances(path, instances)
    manifest.add_outputs([path])
    manifest.finish()
    write_manifest(_out_dir(path), manifest)
    logger.info(f"..{len(instances)} instances written to {path}")
    return 0


def cmd_render(args) -> int:
    opts = resolve(args, [CONFIG_KW.SPACE, CONFIG_KW.COUNT, CONFIG_KW.SEED, CONFIG_KW.STRICT, CONFIG_KW.FORCE])
    space = make_space(opts[CONFIG_KW.SPACE.value])
    if args.instances is not None:
        instances = read_instances(args.instances)
        if args.count is not None:
            instances = instances[: args.count]
    else:
        instances = generate_instances(space, opts[CONFIG_KW.COUNT.value], seed=opts[CONFIG_KW.SEED.value], strict=opts[CONFIG_KW.STRICT.value])
    _check_outputs([os.path.join(args.out, f"inst_{i}_sheet.png") for i in range(len(instances))], opts[CONFIG_KW.FORCE.value])
    manifest = RunManifest(command="render", config=opts, seeds={"seed": opts[CONFIG_KW.SEED.value]})
    if args.instances is not None:
        manifest.add_inputs([args.instances])
    written = []
    logger.info(f"rendering {len(instances)} instances..")
    for i, instance in enumerate(instances):
        written.extend(save_instance_pngs(make_space(instance.space), instance, i, args.out))
    manifest.add_outputs(written)
    manifest.finish()
    write_manifest(args.out, manifest)
    logger.info(f"..{len(written)} images written to {args.out}")
    return 0


def cmd_eval_metrics(args) -> int:
    opts = resolve(args, [CONFIG_KW.SPACE, CONFIG_KW.REPR, CONFIG_KW.METRICS, CONFIG_KW.METRIC_PARAMS, CONFIG_KW.SEED, CONFIG_KW.JOBS, CONFIG_KW.FORCE])
    reprs = opts[CONFIG_KW.REPR.value] or [SOURCE_KIND.GT_INTEGER.value]
    reprs = [reprs] if isinstance(reprs, str) else list(reprs)
    _check_outputs([args.out], opts[CONFIG_KW.FORCE.value])
    manifest = RunManifest(command="eval-metrics", config=opts, seeds={"seed": opts[CONFIG_KW.SEED.value]})
    manifest.add_inputs(reprs)
    rows = _score(opts, reprs)
    os.makedirs(_out_dir(args.out), exist_ok=True)
    write_scores(rows, args.out)
    manifest.add_outputs([args.out])
    manifest.finish()
    write_manifest(_out_dir(args.out), manifest)
    return 0


def _score(opts: dict, reprs: List[str]) -> List[dict]:
    names = metric_names(opts[CONFIG_KW.METRICS.value])
    cells = [
        {"space": opts[CONFIG_KW.SPACE.value], "repr": spec, "metrics": names, "seed": opts[CONFIG_KW.SEED.value], "metric-params": opts[CONFIG_KW.METRIC_PARAMS.value]}
        for spec in reprs
    ]
    logger.info(f"scoring {len(reprs)} representations on {len(names)} metrics..")
    rows = [row for result in _parallel(_metrics_job, cells, opts[CONFIG_KW.JOBS.value]) for row in result]
    logger.info("..scoring done")
    return rows


def cmd_train_wren(args) -> int:
    opts = resolve(
        args,
        [
            CONFIG_KW.SPACE,
            CONFIG_KW.REPR,
            CONFIG_KW.CONFIG_SEED,
            CONFIG_KW.GEN_SEED,
            CONFIG_KW.WREN_CONFIGS,
            CONFIG_KW.NO_POSITION_TAGS,
            CONFIG_KW.SEEDS,
            CONFIG_KW.STEPS,
            CONFIG_KW.BATCH,
            CONFIG_KW.EVAL_EVERY,
            CONFIG_KW.EVAL_BATCHES,
            CONFIG_KW.JOBS,
            CONFIG_KW.FORCE,
        ],
    )
    reprs = opts[CONFIG_KW.REPR.value] or [SOURCE_KIND.GT_INTEGER.value]
    reprs = [reprs] if isinstance(reprs, str) else list(reprs)
    _check_outputs([args.out], opts[CONFIG_KW.FORCE.value])
    manifest = RunManifest(
        command="train-wren", config=opts, seeds={"config-seed": opts[CONFIG_KW.CONFIG_SEED.value], "gen-seed": opts[CONFIG_KW.GEN_SEED.value]}
    )
    manifest.add_inputs(reprs)
    params_dir = os.path.join(_out_dir(args.out), "params") if args.save_params else None
    rows = _train(opts, reprs, params_dir)
    os.makedirs(_out_dir(args.out), exist_ok=True)
    write_curves(rows, args.out)
    manifest.add_outputs([args.out])
    manifest.finish()
    write_manifest(_out_dir(args.out), manifest)
    return 0


def _train(opts: dict, reprs: List[str], params_dir: str | None = None) -> List[dict]:
    cells = _train_cells(opts, reprs, params_dir)
    logger.info(f"training {len(cells)} jobs..")
    rows = [row for result in _parallel(_train_job, cells, opts[CONFIG_KW.JOBS.value]) for row in result]
    logger.info("..training done")
    return rows


def cmd_analyze(args) -> int:
    opts = resolve(args, [CONFIG_KW.METRICS, CONFIG_KW.RAW_ROWS, CONFIG_KW.FORCE])
    _check_outputs([os.path.join(args.out, REPORT_FILE)], opts[CONFIG_KW.FORCE.value])
    manifest = RunManifest(command="analyze", config=opts, seeds={})
    manifest.add_inputs([args.scores, args.curves])
    table = build_results_table(load_scores(args.scores), load_curves(args.curves), raw_rows=bool(opts[CONFIG_KW.RAW_ROWS.value]))
    metrics = opts[CONFIG_KW.METRICS.value]
    if metrics in (None, "all"):
        metrics = None
    elif isinstance(metrics, str):
        metrics = [name for m in metrics.split(",") for name in METRIC_GROUPS.get(m.strip(), [m.strip()])]
    written = write_report(analyze(table, metrics=metrics), args.out)
    manifest.add_outputs(written)
    manifest.finish()
    write_manifest(args.out, manifest)
    return 0


def cmd_ladder(args) -> int:
    opts = resolve(
        args,
        [
            CONFIG_KW.SPACE,
            CONFIG_KW.LEVELS,
            CONFIG_KW.MIX_SEED,
            CONFIG_KW.WITH_BASELINES,
            CONFIG_KW.METRICS,
            CONFIG_KW.METRIC_PARAMS,
            CONFIG_KW.SEED,
            CONFIG_KW.CONFIG_SEED,
            CONFIG_KW.GEN_SEED,
            CONFIG_KW.WREN_CONFIGS,
            CONFIG_KW.NO_POSITION_TAGS,
            CONFIG_KW.SEEDS,
            CONFIG_KW.STEPS,
            CONFIG_KW.BATCH,
            CONFIG_KW.EVAL_EVERY,
            CONFIG_KW.EVAL_BATCHES,
            CONFIG_KW.RAW_ROWS,
            CONFIG_KW.JOBS,
            CONFIG_KW.FORCE,
        ],
    )
    scores_path = os.path.join(args.out, SCORES_FILE)
    curves_path = os.path.join(args.out, CURVES_FILE)
    _check_outputs([scores_path, curves_path, os.path.join(args.out, REPORT_FILE)], opts[CONFIG_KW.FORCE.value])
    manifest = RunManifest(
        command="ladder",
        config=opts,
        seeds={k: opts[k] for k in [CONFIG_KW.SEED.value, CONFIG_KW.MIX_SEED.value, CONFIG_KW.CONFIG_SEED.value, CONFIG_KW.GEN_SEED.value]},
    )
    space = make_space(opts[CONFIG_KW.SPACE.value])
    ladder = make_entanglement_ladder(space, opts[CONFIG_KW.LEVELS.value], mix_seed=opts[CONFIG_KW.MIX_SEED.value])
    reprs = [f"{SOURCE_KIND.LINEAR_MIXED.value}:alpha={s.alpha!r},seed={s.mix_seed}" for s in ladder]
    if opts[CONFIG_KW.WITH_BASELINES.value]:
        reprs = reprs + [SOURCE_KIND.GT_INTEGER.value, SOURCE_KIND.GT_ONEHOT.value]
    logger.info(f"ladder of {len(ladder)} levels on {space.id}, {len(reprs)} representations")
    os.makedirs(args.out, exist_ok=True)
    write_scores(_score(opts, reprs), scores_path)
    write_curves(_train(opts, reprs), curves_path)
    table = build_results_table(load_scores(scores_path), load_curves(curves_path), raw_rows=bool(opts[CONFIG_KW.RAW_ROWS.value]))
    written = write_report(analyze(table), args.out)
    manifest.add_outputs([scores_path, curves_path] + written)
    manifest.finish()
    write_manifest(args.out, manifest)
    return 0


# ##########################################
# Command line
#
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="config_file", type=str, help="YAML file with default option values")
    common.add_argument("--space", type=str, choices=space_ids(), help="factor space")
    common.add_argument("--seed", type=int, help="base seed")
    common.add_argument("--jobs", type=int, help="number of worker processes")
    common.add_argument("--strict", action="store_true", help="regenerate instances until exactly one answer is consistent")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(prog="ravenbench-cli", description=DESC)
    parser.add_argument("--version", action="version", version=f"{__NAME__} {__version__} {__COPYRIGHT__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("generate", parents=[common], help="write task instances")
    p.add_argument("--count", type=int, help="number of instances")
    p.add_argument("--out", type=str, required=True, help="instances JSON-lines file")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("render", parents=[common], help="render instances to PNG")
    p.add_argument("--instances", type=str, help="instances file, generated from --seed and --count when absent")
    p.add_argument("--count", type=int, help="number of instances")
    p.add_argument("--out", type=str, required=True, help="output directory")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("eval-metrics", parents=[common], help="score representations")
    p.add_argument("--repr", type=str, nargs="+", help="representation file or oracle spec like linear_mixed:alpha=0.5,seed=1")
    p.add_argument("--metrics", type=str, help="'all' or comma separated metric names")
    p.add_argument("--out", type=str, required=True, help="scores CSV file")
    p.set_defaults(func=cmd_eval_metrics)

    p = sub.add_parser("train-wren", parents=[common], help="train relation networks")
    p.add_argument("--repr", type=str, nargs="+", help="representation file or oracle spec")
    p.add_argument("--config-seed", type=int, help="seed of the hyperparameter draws")
    p.add_argument("--gen-seed", type=int, help="first instance generator seed")
    p.add_argument("--wren-configs", type=int, help="number of sampled hyperparameter configs")
    p.add_argument("--no-position-tags", action="store_true", help="score without panel position tags")
    p.add_argument("--seeds", type=int, help="number of generator seeds per config")
    p.add_argument("--steps", type=int, help="training steps")
    p.add_argument("--batch", type=int, help="instances per step")
    p.add_argument("--eval-every", type=int, help="steps between evaluations")
    p.add_argument("--eval-batches", type=int, help="batches per evaluation")
    p.add_argument("--save-params", action="store_true", help="save final parameters next to the curves file")
    p.add_argument("--out", type=str, required=True, help="curves CSV file")
    p.set_defaults(func=cmd_train_wren)

    p = sub.add_parser("analyze", parents=[common], help="correlate scores and accuracy")
    p.add_argument("--scores", type=str, required=True, help="scores CSV file")
    p.add_argument("--curves", type=str, required=True, help="curves CSV file")
    p.add_argument("--metrics", type=str, help="'all' or comma separated metric names")
    p.add_argument("--raw-rows", action="store_true", help="one row per run instead of per representation")
    p.add_argument("--out", type=str, required=True, help="report directory")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("ladder", parents=[common], help="full pipeline over an entanglement ladder")
    p.add_argument("--levels", type=int, help="number of ladder levels")
    p.add_argument("--mix-seed", type=int, help="seed of the shared mixing rotation")
    p.add_argument("--with-baselines", action="store_true", help="add ground-truth integer and one-hot representations")
    p.add_argument("--metrics", type=str, help="'all' or comma separated metric names")
    p.add_argument("--config-seed", type=int, help="seed of the hyperparameter draws")
    p.add_argument("--gen-seed", type=int, help="first instance generator seed")
    p.add_argument("--wren-configs", type=int, help="number of sampled hyperparameter configs")
    p.add_argument("--no-position-tags", action="store_true", help="score without panel position tags")
    p.add_argument("--seeds", type=int, help="number of generator seeds per config")
    p.add_argument("--steps", type=int, help="training steps")
    p.add_argument("--batch", type=int, help="instances per step")
    p.add_argument("--eval-every", type=int, help="steps between evaluations")
    p.add_argument("--eval-batches", type=int, help="batches per evaluation")
    p.add_argument("--raw-rows", action="store_true", help="one row per run instead of per representation")
    p.add_argument("--out", type=str, required=True, help="output directory")
    p.set_defaults(func=cmd_ladder)
    return parser


def setup_logging(verbose: bool = False):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=FORMAT, datefmt="%H:%M:%S")
    root = logging.getLogger(__NAME__)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    if LOGFILE is not None and not any(isinstance(h, logging.FileHandler) for h in root.handlers):
        handler = logging.FileHandler(LOGFILE, mode="a")
        handler.setFormatter(logging.Formatter(FORMAT))
        root.addHandler(handler)


def main(argv: List[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    logger.debug(f"{__NAME__} {__version__}: {args.command}")
    try:
        return args.func(args)
    except GenerationError as e:
        logger.error(f"{args.command} failed at stage {e.stage}: {e}")
        return 1
    except RavenbenchError as e:
        logger.error(f"{args.command} failed: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
