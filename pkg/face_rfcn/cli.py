"""Command-line surface: gen, train, detect, eval and bench."""
import argparse
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from loguru import logger

from .data import (
    generate,
    list_images,
    load_annotations,
    load_dataset,
    read_image,
    save_dataset,
)
from .errors import ConfigError, FaceRFCNError, MissingArtifactError
from .evaluation import evaluate_dataset, read_detections, write_curve, write_detections
from .evaluation.detections import render_detections
from .models import BenchReport, Detection, EvalSummary, Sample, boxes_to_array
from .net import Detector, Trainer, load_checkpoint, save_checkpoint
from .utils import RunConfig, configure_logging, load_run_config, write_run_config

RUN_CONFIG_NAME = "run.cfg"


def _load_config(path: Optional[str]) -> RunConfig:
    config = load_run_config(path)
    configure_logging(config.log_level, config.log_file)
    return config


def _training_samples(config: RunConfig) -> List[Sample]:
    if config.paths.train_annotations:
        return load_dataset(config.paths.train_annotations)
    return generate(config.dataset)


def cmd_gen(config: RunConfig, out_dir: str) -> Path:
    """Generate the configured synthetic dataset into ``out_dir``."""
    samples = generate(config.dataset)
    annotation_path = save_dataset(samples, out_dir)
    write_run_config(config, Path(out_dir) / RUN_CONFIG_NAME)
    return annotation_path


def train_model(config: RunConfig, samples: Sequence[Sample], loss_log: Optional[Path] = None):
    trainer = Trainer(config)
    return trainer.run(samples, loss_log)


def cmd_train(config: RunConfig) -> Path:
    """Train on the configured data; writes the checkpoint, loss log and run config."""
    samples = _training_samples(config)
    state = train_model(config, samples, Path(config.paths.loss_log))
    checkpoint = Path(config.paths.checkpoint)
    save_checkpoint(state, checkpoint, config.model_dump(mode="json"))
    write_run_config(config, checkpoint.parent / RUN_CONFIG_NAME)
    return checkpoint


def _input_images(input_path: Path) -> List[Path]:
    if input_path.is_dir():
        return list_images(input_path)
    if input_path.is_file():
        return [input_path]
    raise MissingArtifactError(f"Input not found: {input_path}")


def cmd_detect(
    config: RunConfig,
    checkpoint: str,
    input_path: str,
    output: Optional[str] = None,
    single_scale: bool = False,
) -> Dict[str, List[Detection]]:
    """Detect faces in one image or every image of a directory."""
    state, _ = load_checkpoint(checkpoint)
    detector = Detector(state, config)
    detections: Dict[str, List[Detection]] = {}
    for path in _input_images(Path(input_path)):
        detections[path.stem] = detector.run(read_image(path), single_scale=single_scale)
        logger.debug(f"{path.name}: {len(detections[path.stem])} detections")

    if output:
        write_detections(detections, output)
        logger.info(f"Wrote detections for {len(detections)} images to {output}")
    else:
        sys.stdout.write(render_detections(detections))
    return detections


def _write_evaluation(summary: EvalSummary, curves, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, curve in curves.items():
        write_curve(curve, out_dir / f"{name}.csv")
    (out_dir / "summary.json").write_text(summary.model_dump_json(indent=2), encoding="utf-8")


def cmd_eval(config: RunConfig, detections: str, annotations: str, out_dir: str) -> EvalSummary:
    """Evaluate a detections file against an annotation file; writes curves and summary.json."""
    dets = read_detections(detections)
    gts = {
        Path(image_path).stem: boxes_to_array(boxes)
        for image_path, boxes in load_annotations(annotations)
    }
    summary, curves = evaluate_dataset(dets, gts, config.eval)
    _write_evaluation(summary, curves, Path(out_dir))
    return summary


def _evaluate_detector(
    detector: Detector, samples: Sequence[Sample], config: RunConfig, single_scale: bool
):
    detections = {s.id: detector.run(s.image, single_scale=single_scale) for s in samples}
    annotations = {s.id: s.gts for s in samples}
    summary, curves = evaluate_dataset(detections, annotations, config.eval)
    return detections, summary, curves


def cmd_bench(config: RunConfig, out_dir: str, compare_uniform: bool = False) -> BenchReport:
    """Generate, train and evaluate the desk-scale benchmark; misses are reported as warnings."""
    out = Path(out_dir)
    train_samples = generate(config.dataset)
    test_spec = config.dataset.model_copy(
        update={"seed": config.dataset.seed + 1, "count": config.eval.bench_test_count}
    )
    test_samples = generate(test_spec)
    save_dataset(test_samples, out / "test")
    write_run_config(config, out / RUN_CONFIG_NAME)

    state = train_model(config, train_samples, out / "loss.csv")
    save_checkpoint(state, out / "model.psd", config.model_dump(mode="json"))
    detector = Detector(state, config)

    results = {}
    for mode, single in (("single", True), ("pyramid", False)):
        detections, summary, curves = _evaluate_detector(detector, test_samples, config, single)
        write_detections(detections, out / mode / "detections.txt")
        _write_evaluation(summary, curves, out / mode)
        results[mode] = summary

    uniform_ap = None
    if compare_uniform:
        trainer = Trainer(config)
        trainer.state.cls_weights.frozen = True
        uniform_state = trainer.run(train_samples)
        _, summary, _ = _evaluate_detector(
            Detector(uniform_state, config), test_samples, config, single_scale=False
        )
        uniform_ap = summary.bucket("all").ap

    warnings = []
    pyramid = results["pyramid"]
    for bucket, target in (
        ("easy", config.eval.bench_min_easy_ap),
        ("hard", config.eval.bench_min_hard_ap),
    ):
        ap = pyramid.bucket(bucket).ap
        if ap is None or ap < target:
            warnings.append(f"{bucket} AP {ap} below target {target}")

    single_hard = results["single"].bucket("hard").recall
    pyramid_hard = pyramid.bucket("hard").recall
    if pyramid_hard is None or (single_hard is not None and pyramid_hard < single_hard):
        warnings.append(f"pyramid hard recall {pyramid_hard} below single-scale {single_hard}")

    cls_weight_std = float(np.std(state.cls_weights.w))
    if cls_weight_std <= config.eval.bench_min_weight_std:
        warnings.append(
            f"class weight std {cls_weight_std:.4g} not above {config.eval.bench_min_weight_std}"
        )

    report = BenchReport(
        iterations=config.train.iterations,
        train_images=len(train_samples),
        test_images=len(test_samples),
        single_scale=results["single"],
        pyramid=pyramid,
        cls_weight_std=cls_weight_std,
        uniform_ap=uniform_ap,
        warnings=warnings,
    )
    (out / "bench.json").write_text(report.model_dump_json(indent=2), encoding="utf-8")

    logger.info(
        f"Hard recall: single={single_hard} pyramid={pyramid_hard}; "
        f"class weight std={cls_weight_std:.4g}; uniform AP={uniform_ap}"
    )
    if report.passed:
        logger.info("Benchmark targets met")
    for warning in report.warnings:
        logger.warning(f"Benchmark target missed: {warning}")
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="face-rfcn", description="Face detection with position-sensitive average pooling"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="Generate a synthetic dataset")
    gen.add_argument("--config", help="Run config file")
    gen.add_argument("--out", required=True, help="Output directory")

    train = sub.add_parser("train", help="Train a detector")
    train.add_argument("--config", help="Run config file")

    detect = sub.add_parser("detect", help="Detect faces in an image or directory")
    detect.add_argument("--config", help="Run config file")
    detect.add_argument("--checkpoint", required=True, help="Checkpoint file")
    detect.add_argument("--input", required=True, help="Image file or directory")
    detect.add_argument("--output", help="Detections file (default: stdout)")
    detect.add_argument("--single-scale", action="store_true", help="Skip the test pyramid")

    evaluate = sub.add_parser("eval", help="Evaluate detections against annotations")
    evaluate.add_argument("--config", help="Run config file")
    evaluate.add_argument("--detections", required=True, help="Detections file")
    evaluate.add_argument("--annotations", required=True, help="Annotation file")
    evaluate.add_argument("--out", required=True, help="Output directory")

    bench = sub.add_parser("bench", help="Run the desk-scale benchmark")
    bench.add_argument("--config", help="Run config file")
    bench.add_argument("--out", required=True, help="Output directory")
    bench.add_argument(
        "--compare-uniform",
        action="store_true",
        help="Also train with class-branch position weights frozen at uniform",
    )
    return parser


def run_command(args: argparse.Namespace) -> None:
    config = _load_config(args.config)
    if args.command == "gen":
        cmd_gen(config, args.out)
    elif args.command == "train":
        cmd_train(config)
    elif args.command == "detect":
        cmd_detect(config, args.checkpoint, args.input, args.output, args.single_scale)
    elif args.command == "eval":
        cmd_eval(config, args.detections, args.annotations, args.out)
    elif args.command == "bench":
        cmd_bench(config, args.out, args.compare_uniform)
    else:
        raise ConfigError(f"Unknown command '{args.command}'")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse ``argv`` and run one command.

    Returns:
        0 on success, otherwise the exit code of the raised error (1 for unexpected failures)
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if not e.code else ConfigError.exit_code

    try:
        run_command(args)
    except FaceRFCNError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except Exception:
        logger.exception(f"Command '{args.command}' failed")
        return 1
    return 0
