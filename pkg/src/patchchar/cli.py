"""Command-line interface: generate | perturb | characterize | roc | detect.

Every subcommand is a pure function of (config file, flags): reruns produce
byte-identical outputs. Exit codes: 0 success, 2 config error, 3 IO error,
4 numerical/degenerate-input error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import changedetect as cd
from . import characterize as ch
from .config import ExperimentConfig, dump_defaults, load_config
from .errors import (
    ConfigError,
    DegenerateInputError,
    ImageFormatError,
    ParameterError,
    ZeroVarianceError,
)
from .image import LABEL_CODES, SpatialContext, load_image, save_image, save_label_map
from .perturb import NoiseSpec, sensor
from .scene import generate_scene
from .svgplot import heatmap_svg, line_plot_svg

log = logging.getLogger("patchchar")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


def _ensure_out(path: str, create: bool) -> None:
    if not os.path.isdir(path):
        if not create:
            raise FileNotFoundError(
                f"output directory {path!r} does not exist (pass --create to make it)"
            )
        os.makedirs(path, exist_ok=True)


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    from dataclasses import replace

    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["out"] = args.out
    if args.jobs is not None:
        updates["jobs"] = args.jobs
    return replace(cfg, **updates) if updates else cfg


def cmd_generate(cfg: ExperimentConfig, args) -> int:
    _ensure_out(cfg.out, args.create)
    scene = generate_scene(cfg.scene, cfg.seed)
    save_image(scene.base, os.path.join(cfg.out, "base.pgm"))
    save_image(ch.reference_frame(scene), os.path.join(cfg.out, "reference.pgm"))
    save_label_map(scene.labels, os.path.join(cfg.out, "labels.pgm"))
    log.info("wrote base.pgm, reference.pgm, labels.pgm to %s", cfg.out)
    return EXIT_OK


def cmd_perturb(cfg: ExperimentConfig, args) -> int:
    _ensure_out(cfg.out, args.create)
    scene = generate_scene(cfg.scene, cfg.seed)
    family = ch.make_family(cfg.family_name, cfg.family_params)
    levels = cfg.resolved_levels()
    level = args.level
    try:
        index = [abs(lv - level) < 1e-12 for lv in levels].index(True)
    except ValueError:
        index = 0
    frame = ch.render_level_frame(scene, family, level, index, cfg.sensor, cfg.seed)
    name = f"frame_{cfg.family_name}_{level:g}.pgm"
    save_image(frame, os.path.join(cfg.out, name))
    log.info("wrote %s", name)
    return EXIT_OK


def cmd_characterize(cfg: ExperimentConfig, args) -> int:
    _ensure_out(cfg.out, args.create)
    scene = generate_scene(cfg.scene, cfg.seed)
    family = ch.make_family(cfg.family_name, cfg.family_params)
    levels = cfg.resolved_levels()
    for metric in cfg.metrics:
        manifold = ch.sweep_manifold(
            scene, family, levels, cfg.sizes, metric,
            cfg.samples_per_context, cfg.seed, sensor_model=cfg.sensor, jobs=cfg.jobs,
        )
        ch.write_manifold_csv(manifold, os.path.join(cfg.out, f"manifold_{metric}.csv"))
        for axis in ("contexts", "levels", "sizes"):
            exclude = (SpatialContext.OCCLUDED,) if axis == "contexts" else ()
            reduced = ch.marginalize(manifold, axis, exclude=exclude)
            ch.write_marginal_csv(
                reduced, os.path.join(cfg.out, f"marginal_{metric}_over_{axis}.csv")
            )
        summary = ch.summarize(manifold)
        ch.write_summary_csv(summary, os.path.join(cfg.out, f"summary_{metric}.csv"))
        if args.svg:
            size_idx = list(cfg.sizes).index(13) if 13 in cfg.sizes else len(cfg.sizes) // 2
            series = {
                ctx.value: (np.asarray(levels), manifold.values[ci, :, size_idx])
                for ci, ctx in enumerate(manifold.contexts)
            }
            line_plot_svg(
                series, os.path.join(cfg.out, f"manifold_{metric}.svg"),
                xlabel="level", ylabel=metric,
            )
            reduced = ch.marginalize(manifold, "contexts", exclude=(SpatialContext.OCCLUDED,))
            heatmap_svg(
                reduced.values, os.path.join(cfg.out, f"marginal_{metric}.svg"),
                row_labels=[f"{lv:g}" for lv in levels],
                col_labels=[str(s) for s in cfg.sizes],
            )
        log.info("metric %s: optimal patch size %d", metric,
                 ch.optimal_patch_size(manifold, exclude=(SpatialContext.OCCLUDED,)))
    return EXIT_OK


def cmd_roc(cfg: ExperimentConfig, args) -> int:
    _ensure_out(cfg.out, args.create)
    recipe = cfg.roc
    if recipe.n_samples < 1:
        raise DegenerateInputError("roc recipe produces zero changed samples")
    noise = NoiseSpec(recipe.noise_kind, recipe.noise_level, seed=cfg.seed)
    gain = None if args.no_illumination else (recipe.gain_lo, recipe.gain_hi)
    curves = ch.roc_study(
        cfg.metrics,
        n_samples=recipe.n_samples,
        size=recipe.patch_size,
        seed=cfg.seed,
        gain_range=gain,
        noise=noise,
        texture_range=(recipe.texture_lo, recipe.texture_hi),
    )
    with open(os.path.join(cfg.out, "roc_summary.csv"), "w", newline="") as fh:
        fh.write("metric,auc\n")
        for metric in cfg.metrics:
            curve = curves[metric]
            ch.write_roc_csv(curve, os.path.join(cfg.out, f"roc_{metric}.csv"))
            fh.write(f"{metric},{curve.auc:.9g}\n")
            if args.svg:
                line_plot_svg(
                    {metric: (curve.points[:, 0], curve.points[:, 1])},
                    os.path.join(cfg.out, f"roc_{metric}.svg"),
                    xlabel="false positive rate", ylabel="true positive rate",
                )
    return EXIT_OK


def cmd_detect(cfg: ExperimentConfig, args) -> int:
    _ensure_out(cfg.out, args.create)
    reference = load_image(args.reference)
    current = load_image(args.current)
    det = cfg.detector
    if det.threshold_policy == "calibrated":
        stack = [
            sensor(reference, cfg.sensor, cfg.seed + i) if cfg.sensor else reference
            for i in range(args.calibration_frames)
        ]
        threshold = cd.calibrate_threshold(stack, reference, det)
    else:
        threshold = det.threshold
    mask = cd.detect_changes(reference, current, det, threshold)
    cd.save_mask_image(mask, os.path.join(cfg.out, "mask.pgm"))
    cd.write_mask_csv(mask, os.path.join(cfg.out, "mask.csv"))
    if args.labels:
        label_img = load_image(args.labels)
        codes = np.round(label_img.data * 255.0).astype(np.uint8)
        truth = cd.truth_mask_from_labels(
            codes, LABEL_CODES[SpatialContext.OCCLUDED], det.block_size
        )
        ev = cd.evaluate_mask(mask, truth)
        with open(os.path.join(cfg.out, "detect_metrics.csv"), "w", newline="") as fh:
            fh.write("precision,recall,f1,false_positives,degenerate\n")
            fh.write(
                f"{ev.precision:.9g},{ev.recall:.9g},{ev.f1:.9g},"
                f"{len(ev.false_positive_blocks)},{int(ev.degenerate)}\n"
            )
        log.info("detect f1=%.4f precision=%.4f recall=%.4f", ev.f1, ev.precision, ev.recall)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="patchchar",
        description="Quasi-invariant patch matching and performance characterization",
    )
    parser.add_argument("--config", help="TOML experiment config")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--jobs", type=int, help="parallel sweep workers")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("--create", action="store_true", help="create the output dir if missing")
    parser.add_argument("--dump-defaults", metavar="PATH",
                        help="write the default config file and exit")
    parser.add_argument("--svg", action="store_true", help="also emit SVG plots")

    sub = parser.add_subparsers(dest="command")
    sub.add_parser("generate", help="write scene renders and the label map")
    p = sub.add_parser("perturb", help="render a single perturbed frame")
    p.add_argument("--level", type=float, required=True)
    sub.add_parser("characterize", help="sweep the criterion manifold")
    p = sub.add_parser("roc", help="ROC study over a simulated patch population")
    p.add_argument("--no-illumination", action="store_true",
                   help="apply noise only, no gain perturbation")
    p = sub.add_parser("detect", help="block-level change detection")
    p.add_argument("reference")
    p.add_argument("current")
    p.add_argument("--labels", help="label map for ground-truth evaluation")
    p.add_argument("--calibration-frames", type=int, default=8)
    return parser


_COMMANDS = {
    "generate": cmd_generate,
    "perturb": cmd_perturb,
    "characterize": cmd_characterize,
    "roc": cmd_roc,
    "detect": cmd_detect,
}


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("PATCHCHAR_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.dump_defaults:
        try:
            dump_defaults(args.dump_defaults)
        except OSError as exc:
            log.error("%s", exc)
            return EXIT_IO
        return EXIT_OK
    if not args.command:
        parser.print_help()
        return EXIT_CONFIG
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        return _COMMANDS[args.command](cfg, args)
    except (ConfigError, ParameterError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (OSError, ImageFormatError) as exc:
        log.error("io error: %s", exc)
        return EXIT_IO
    except (DegenerateInputError, ZeroVarianceError) as exc:
        log.error("degenerate input: %s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
