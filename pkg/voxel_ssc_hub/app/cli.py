"""
Command-line surface: ``ssc synth|train|eval|infer|gradcheck``.

Every command prints one JSON document on stdout; logs go to stderr.
Errors map to exit codes: 1 invalid input, 2 I/O, 3 missing dependency,
4 shape mismatch, 5 numeric failure.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from app.config.presets import get_preset, get_preset_names
from app.config.run_config import RunConfig, load_config
from app.utils.errors import DatasetIOError, InvalidInputError, NumericFailureError, SSCError
from app.utils.logging_setup import configure_logging, get_logger

logger = get_logger("ssc")


def _ranges(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"ranges must be comma-separated metres, got '{text}'") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run config")
    common.add_argument("--preset", choices=get_preset_names(), help="named preset used as the base config")
    common.add_argument("--seed", type=int, help="run seed")
    common.add_argument("--query-mode", help="occupancy | dense | random:p | oracle | raw")
    common.add_argument("--frames", type=int, help="temporal frame count")
    common.add_argument("--temporal-mode", choices=["online", "offline"])
    common.add_argument("--feature-scale", type=float, help="feature map scale (1, 0.5, 0.25, 0.125, 0.0625)")
    common.add_argument("--no-self-attention", action="store_true")
    common.add_argument("--no-cross-attention", action="store_true")
    common.add_argument("--no-affinity", action="store_true", help="train without the affinity loss")
    common.add_argument("--no-registry", action="store_true", help="do not record to the run registry")

    parser = argparse.ArgumentParser(prog="ssc", description="Two-stage sparse voxel scene completion")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", parents=[common], help="synthesize a dataset")
    synth.add_argument("--count", type=int, default=1)
    synth.add_argument("--out", required=True)

    train = commands.add_parser("train", parents=[common], help="train stage 1 or stage 2")
    train.add_argument("--stage", type=int, choices=[1, 2], required=True)
    train.add_argument("--dataset", required=True)
    train.add_argument("--out", required=True, help="checkpoint path")
    train.add_argument("--stage1", help="stage-1 checkpoint (stage 2 with occupancy queries)")
    train.add_argument("--steps", type=int)
    train.add_argument("--scenes", type=int, help="use only the first N scenes")
    train.add_argument("--resume", action="store_true")

    evaluate = commands.add_parser("eval", parents=[common], help="evaluate the pipeline")
    evaluate.add_argument("--dataset", required=True)
    evaluate.add_argument("--stage1")
    evaluate.add_argument("--stage2")
    evaluate.add_argument("--out", required=True, help="report directory")
    evaluate.add_argument("--ranges", type=_ranges)
    evaluate.add_argument("--bypass", action="store_true", help="score ground truth against itself")
    evaluate.add_argument("--xlsx", action="store_true", help="also write metrics.xlsx")
    evaluate.add_argument("--label")

    infer = commands.add_parser("infer", parents=[common], help="write predictions")
    infer.add_argument("--dataset", required=True)
    infer.add_argument("--stage1")
    infer.add_argument("--stage2", required=True)
    infer.add_argument("--out", required=True)

    gradcheck = commands.add_parser("gradcheck", parents=[common], help="run the gradient suite")
    gradcheck.add_argument("--seeds", type=int, default=10)
    gradcheck.add_argument("--ops", help="comma-separated operation names")
    gradcheck.add_argument("--max-coords", type=int, default=24)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Preset (or defaults), then the config file, then command-line overrides."""
    config = get_preset(args.preset) if args.preset else RunConfig()
    if args.config:
        config = load_config(args.config, config)
    overrides = {}
    if args.seed is not None:
        overrides['seed'] = args.seed
    if args.query_mode is not None:
        overrides['query_mode'] = args.query_mode
    if args.frames is not None:
        overrides['frames'] = args.frames
    if args.temporal_mode is not None:
        overrides['temporal_mode'] = args.temporal_mode
    if args.feature_scale is not None:
        overrides['feature_scale'] = args.feature_scale
    if args.no_self_attention:
        overrides['self_attention'] = False
    if args.no_cross_attention:
        overrides['cross_attention'] = False
    if args.no_affinity:
        overrides['affinity'] = False
    if getattr(args, 'ranges', None):
        overrides['ranges'] = tuple(args.ranges)
    return config.replace(**overrides).validate()


def open_registry(args: argparse.Namespace):
    if args.no_registry:
        return None
    try:
        from app.services.registry_service import RegistryService
        return RegistryService()
    except Exception as e:
        logger.warning(f"run registry unavailable, continuing without it: {e}")
        return None


def cmd_synth(args, config: RunConfig) -> dict:
    from app.services.dataset_service import DatasetService

    service = DatasetService(config)
    manifest = service.synthesize(args.out, args.count, config.seed)
    registry = open_registry(args)
    if registry is not None:
        registry.register_dataset(str(Path(args.out).resolve()), config.seed, args.count, service.describe())
    return {'command': 'synth', 'out': args.out, 'scenes': len(manifest['scenes']), 'seed': config.seed}


def cmd_train(args, config: RunConfig) -> dict:
    from app.services.dataset_service import DatasetService
    from app.services.training_service import TrainingService

    samples = DatasetService(config).load(args.dataset, args.scenes)
    service = TrainingService(config, open_registry(args), args.preset)
    dataset_path = str(Path(args.dataset).resolve())
    if args.stage == 1:
        summary = service.train_stage1(samples, args.out, args.steps, args.resume, dataset_path)
    else:
        summary = service.train_stage2(samples, args.out, args.stage1, args.steps, args.resume, dataset_path)
    return {'command': 'train', 'stage': args.stage, 'checkpoint': str(summary.checkpoint),
            'loss_log': str(summary.loss_log), 'steps': summary.steps, 'final_loss': summary.final_loss}


def cmd_eval(args, config: RunConfig) -> dict:
    from app.services.dataset_service import DatasetService
    from app.services.evaluation_service import EvaluationService

    samples = DatasetService(config).load(args.dataset)
    summary = EvaluationService(config, open_registry(args)).evaluate(
        samples, args.stage1, args.stage2, args.out, config.ranges, args.bypass,
        label=args.label or args.preset, dataset_path=str(Path(args.dataset).resolve()), xlsx=args.xlsx)
    return {'command': 'eval', 'out': args.out, 'report': summary.aggregate.to_dict()}


def cmd_infer(args, config: RunConfig) -> dict:
    from app.services.dataset_service import DatasetService
    from app.services.inference_service import InferenceService

    samples = DatasetService(config).load(args.dataset)
    outputs = InferenceService(config).infer(samples, args.stage1, args.stage2, args.out)
    return {'command': 'infer', 'out': args.out, 'scenes': outputs}


def cmd_gradcheck(args, config: RunConfig) -> dict:
    from app.services.gradcheck_service import GRADIENT_SUITE, run_suite

    names = [n.strip() for n in args.ops.split(",")] if args.ops else list(GRADIENT_SUITE)
    unknown = [n for n in names if n not in GRADIENT_SUITE]
    if unknown:
        raise InvalidInputError(f"unknown operations: {', '.join(unknown)}")
    results = run_suite(args.seeds, names, args.max_coords)
    for name, seed, report in results:
        print(f"{name}\tseed={seed}\t{report.summary()}", file=sys.stderr)
    failed = [f"{name}/{seed}" for name, seed, report in results if not report.passed]
    if failed:
        raise NumericFailureError(f"gradient check failed for {', '.join(failed)}")
    worst = max(report.max_relative_error for _, _, report in results)
    return {'command': 'gradcheck', 'checks': len(results), 'max_relative_error': worst}


COMMANDS = {
    'synth': cmd_synth,
    'train': cmd_train,
    'eval': cmd_eval,
    'infer': cmd_infer,
    'gradcheck': cmd_gradcheck,
}


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # usage errors share the invalid-input code
        return 0 if e.code in (0, None) else InvalidInputError.exit_code
    try:
        config = resolve_config(args)
        result = COMMANDS[args.command](args, config)
    except SSCError as e:
        logger.error(str(e))
        return e.exit_code
    except OSError as e:
        logger.error(str(e))
        return DatasetIOError.exit_code
    print(json.dumps(result, indent=2, default=str))
    return 0
