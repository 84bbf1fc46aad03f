import argparse

from ..constants import SIT_GRID_SCALES, GuidanceScheme, RopeMode, TaskKind
from ..flow import GuidanceConfig, SamplerConfig
from ..logger import logger
from ..synthdata import all_specs, export_corpus
from .dao import ReportDAO
from .schemas import load_run_config
from .service import CheckpointService, EvalService, SampleService, SurgeryService, TrainService


def cmd_train(args: argparse.Namespace) -> None:
    config = load_run_config(args.config)
    TrainService.train(config, args.out_dir, resume=args.resume)


def _guidance(args: argparse.Namespace) -> GuidanceConfig:
    return GuidanceConfig(scheme=args.cfg, s=args.scale, s1=args.s1, s2=args.s2, renorm=args.renorm)


def cmd_sample(args: argparse.Namespace) -> None:
    model, _ = CheckpointService.load_model(args.ckpt)
    SampleService.sample(
        model,
        args.mode,
        args.caption,
        args.image,
        _guidance(args),
        SamplerConfig(n_steps=args.steps, seed=args.seed),
        args.out_dir,
        num_frames=args.frames,
    )


def cmd_long_video(args: argparse.Namespace) -> None:
    model, _ = CheckpointService.load_model(args.ckpt)
    SampleService.long_video(
        model,
        args.caption,
        args.keyframes,
        args.segment_frames,
        _guidance(args),
        SamplerConfig(n_steps=args.steps, seed=args.seed),
        args.out_dir,
        keyframe_stride=args.keyframe_stride,
        dedupe_boundaries=args.dedupe_boundaries,
    )


def cmd_surgery(args: argparse.Namespace) -> None:
    target = load_run_config(args.target)
    SurgeryService.run(target, args.out_dir, from_t2i=args.from_t2i, from_t2v=args.from_t2v, rope_mode=args.rope)


def cmd_gridsearch(args: argparse.Namespace) -> None:
    model, config = CheckpointService.load_model(args.ckpt)
    if args.steps is not None:
        config.sampler = config.sampler.model_copy(update={"n_steps": args.steps})
    EvalService.gridsearch(model, config, args.scales1, args.scales2, args.out_dir, renorm=args.renorm)


def cmd_eval(args: argparse.Namespace) -> None:
    model, config = CheckpointService.load_model(args.ckpt)
    if args.steps is not None:
        config.sampler = config.sampler.model_copy(update={"n_steps": args.steps})
    report = EvalService.evaluate(model, config)
    ReportDAO.save(args.out_dir, "report", report.model_dump(mode="json"))


def cmd_export_corpus(args: argparse.Namespace) -> None:
    export_corpus(args.out_dir, all_specs(args.frames, args.height, args.width))


def _add_guidance(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--cfg", type=GuidanceScheme, default=GuidanceScheme.JIT, choices=list(GuidanceScheme))
    parser.add_argument("--scale", type=float, default=7.5)
    parser.add_argument("--s1", type=float, default=1.5)
    parser.add_argument("--s2", type=float, default=7.5)
    parser.add_argument("--renorm", action="store_true")
    parser.add_argument("--steps", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stiv", description="Desk-scale spatial-temporal video diffusion transformer")
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="train on the synthetic corpus")
    train.add_argument("config")
    train.add_argument("--out-dir", default="runs/train")
    train.add_argument("--resume", default=None, help="checkpoint to continue from")
    train.set_defaults(handler=cmd_train)

    sample = commands.add_parser("sample", help="sample one clip from a checkpoint")
    sample.add_argument("--ckpt", required=True)
    sample.add_argument("--mode", type=TaskKind, default=TaskKind.T2V, choices=list(TaskKind))
    sample.add_argument("--caption", nargs="*", default=[])
    sample.add_argument("--image", nargs="*", default=[], help="PPM condition frames in pinned-frame order")
    sample.add_argument("--frames", type=int, default=None)
    sample.add_argument("--out-dir", default="runs/sample")
    _add_guidance(sample)
    sample.set_defaults(handler=cmd_sample)

    long_video = commands.add_parser("long-video", help="keyframes then interpolated segments")
    long_video.add_argument("--ckpt", required=True)
    long_video.add_argument("--caption", nargs="*", default=[])
    long_video.add_argument("--keyframes", type=int, default=20)
    long_video.add_argument("--keyframe-stride", type=int, default=20)
    long_video.add_argument("--segment-frames", type=int, default=20)
    long_video.add_argument("--dedupe-boundaries", action="store_true")
    long_video.add_argument("--out-dir", default="runs/long_video")
    _add_guidance(long_video)
    long_video.set_defaults(handler=cmd_long_video)

    surgery = commands.add_parser("surgery", help="initialise a target model from trained sources")
    surgery.add_argument("--from-t2i", default=None)
    surgery.add_argument("--from-t2v", default=None)
    surgery.add_argument("--target", required=True, help="run config of the target model")
    surgery.add_argument("--rope", type=RopeMode, default=RopeMode.INTERPOLATE, choices=list(RopeMode))
    surgery.add_argument("--out-dir", default="runs/surgery")
    surgery.set_defaults(handler=cmd_surgery)

    grid = commands.add_parser("gridsearch", help="evaluate SIT guidance over an s1 x s2 grid")
    grid.add_argument("--ckpt", required=True)
    grid.add_argument("--scales1", type=float, nargs="+", default=list(SIT_GRID_SCALES))
    grid.add_argument("--scales2", type=float, nargs="+", default=list(SIT_GRID_SCALES))
    grid.add_argument("--renorm", action="store_true")
    grid.add_argument("--steps", type=int, default=None)
    grid.add_argument("--out-dir", default="runs/gridsearch")
    grid.set_defaults(handler=cmd_gridsearch)

    evaluate = commands.add_parser("eval", help="evaluation report for a checkpoint")
    evaluate.add_argument("--ckpt", required=True)
    evaluate.add_argument("--steps", type=int, default=None)
    evaluate.add_argument("--out-dir", default="runs/eval")
    evaluate.set_defaults(handler=cmd_eval)

    export = commands.add_parser("export-corpus", help="write the synthetic corpus as PPM clips")
    export.add_argument("--out-dir", default="corpus")
    export.add_argument("--frames", type=int, default=8)
    export.add_argument("--height", type=int, default=32)
    export.add_argument("--width", type=int, default=32)
    export.set_defaults(handler=cmd_export_corpus)
    return parser


def dispatch(argv=None) -> None:
    args = build_parser().parse_args(argv)
    logger.bind(command=args.command).debug("dispatch")
    args.handler(args)
