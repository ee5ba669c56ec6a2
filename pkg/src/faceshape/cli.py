"""Command-line interface: enrollment, verification, calibration, simulation.

Exit codes: 0 success (and genuine verdicts), 1 a verify command labeled the
input fake, 2 bad input (arguments, files, constraint violations), 3
internal error. Human-readable summaries go to stdout; canonical records are
written as documents next to the CSV tables and figures.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .basis import load_basis, save_basis, synthesize_basis
from .calibration import (
    calibrate_threshold,
    load_scores,
    write_calibration_report,
)
from .detector import AGGREGATION_MAJORITY, AGGREGATION_MEAN, LABEL_FAKE, verify_video
from .docio import write_document
from .errors import DegenerateGeometryError, FaceShapeError
from .experiment import METRIC_MAHALANOBIS, METRICS, ExperimentRunner
from .fitting import fit
from .projection import landmark_document, load_landmark_files, save_landmark_frames
from .report import (
    save_distance_histogram,
    save_frame_scatter,
    save_k_curve,
    save_ladder_curve,
    write_distances_csv,
    write_metrics_csv,
)
from .synthetic import (
    WorldConfig,
    anisotropy_scenario,
    build_world,
    laundering_ladder,
    write_world_manifest,
)
from .template import (
    enroll,
    load_template,
    mahalanobis,
    save_template,
    select_features,
)

EXIT_OK = 0
EXIT_FAKE = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3

log = logging.getLogger("faceshape")


def _basis_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--basis",
        default=os.environ.get("SHAPE_BASIS"),
        help="basis file (defaults to $SHAPE_BASIS)",
    )


def _require_basis(args) -> "ShapeBasis":
    if not args.basis:
        raise FaceShapeError("no basis file given (use --basis or set SHAPE_BASIS)")
    return load_basis(args.basis)


def cmd_basis(args) -> int:
    basis = synthesize_basis(args.landmarks, args.kid, args.kexp, args.seed)
    save_basis(basis, args.out)
    print(f"wrote basis {basis.basis_id} to {args.out}")
    return EXIT_OK


def cmd_enroll(args) -> int:
    basis = _require_basis(args)
    frames = load_landmark_files(args.frames)
    features = []
    skipped = 0
    for landmarks, meta in frames:
        try:
            result = fit(landmarks, basis)
        except DegenerateGeometryError as exc:
            log.warning("skipping frame %s: %s", meta["frame_index"], exc)
            skipped += 1
            continue
        features.append(select_features(result.coeffs, args.k))
    template = enroll(
        features,
        args.subject,
        min_frames=args.min_frames,
        basis_id=basis.basis_id,
    )
    save_template(template, args.out)
    print(
        f"enrolled {args.subject}: {template.frame_count} frames "
        f"({skipped} skipped), k={template.k}, wrote {args.out}"
    )
    return EXIT_OK


def cmd_verify(args) -> int:
    basis = _require_basis(args)
    template = load_template(args.template)
    frames = load_landmark_files(args.frames)
    aggregation = AGGREGATION_MEAN if args.aggregation == "mean" else AGGREGATION_MAJORITY
    verdict = verify_video(
        frames, template, basis, args.threshold, aggregation=aggregation, metric=args.metric
    )
    doc = verdict.as_document(template.subject_id)
    if args.out:
        out = Path(args.out)
        write_document(doc, out / "report.json")
        write_distances_csv(doc["frames"], out / "distances.csv")
        genuine = [v.distance for v in verdict.frame_verdicts if v.label != LABEL_FAKE]
        fake = [v.distance for v in verdict.frame_verdicts if v.label == LABEL_FAKE]
        save_distance_histogram(genuine, fake, out / "distance_hist.png", verdict.threshold)
        save_frame_scatter(verdict, out / "frame_scatter.png")
    distances = [v.distance for v in verdict.frame_verdicts]
    print(
        f"subject {template.subject_id}: {verdict.label} "
        f"(fake fraction {verdict.fake_fraction:.3f}, "
        f"median distance {np.median(distances):.3f}, threshold {args.threshold:g}, "
        f"{len(verdict.skipped)} skipped)"
    )
    return EXIT_FAKE if verdict.label == LABEL_FAKE else EXIT_OK


def _frame_distances(paths, template, basis) -> list[float]:
    distances = []
    for landmarks, meta in load_landmark_files(paths):
        try:
            result = fit(landmarks, basis)
        except DegenerateGeometryError as exc:
            log.warning("skipping frame %s: %s", meta["frame_index"], exc)
            continue
        feature = select_features(result.coeffs, template.k)
        distances.append(mahalanobis(template, feature))
    return distances


def cmd_calibrate(args) -> int:
    if args.genuine_scores and args.fake_scores:
        genuine = load_scores(args.genuine_scores)
        fake = load_scores(args.fake_scores)
    elif args.genuine_frames and args.fake_frames:
        basis = _require_basis(args)
        template = load_template(args.template) if args.template else None
        if template is None:
            raise FaceShapeError("--genuine-frames mode needs --template")
        genuine = _frame_distances(args.genuine_frames, template, basis)
        fake = _frame_distances(args.fake_frames, template, basis)
    else:
        raise FaceShapeError(
            "give either --genuine-scores/--fake-scores or --genuine-frames/--fake-frames"
        )
    result = calibrate_threshold(genuine, fake)
    if args.out:
        out = Path(args.out)
        write_calibration_report(result, out / "calibration.json")
        save_distance_histogram(genuine, fake, out / "score_hist.png", result.threshold)
    print(
        f"threshold {result.threshold:.6g}: acc_genuine {result.acc_genuine:.4f}, "
        f"acc_fake {result.acc_fake:.4f}, acc_overall {result.acc_overall:.4f} "
        f"({result.n_genuine} genuine, {result.n_fake} fake)"
    )
    return EXIT_OK


def _write_world_frames(world, out: Path, n_heldout: int) -> dict:
    files: dict = {}
    scale_note = f"synthetic:seed={world.config.seed}"
    for name in world.subject_names:
        genuine = world.enrollment_frames(name) + world.heldout_frames(name, n_heldout)
        docs = [
            landmark_document(f.landmarks, name, f.frame_index, f"{scale_note}:genuine")
            for f in genuine
        ]
        genuine_path = out / "frames" / f"{name}.json"
        save_landmark_frames(docs, genuine_path)
        source = world.subject_names[
            (world.subject_names.index(name) + 1) % len(world.subject_names)
        ]
        swaps = world.swap_frames(name, source, n_heldout)
        swap_docs = [
            landmark_document(
                f.landmarks, name, f.frame_index, f"{scale_note}:swap-from-{source}"
            )
            for f in swaps
        ]
        swap_path = out / "swaps" / f"{name}_from_{source}.json"
        save_landmark_frames(swap_docs, swap_path)
        files[name] = {
            "genuine": str(genuine_path.relative_to(out)),
            "swap": str(swap_path.relative_to(out)),
            "swap_source": source,
        }
    return files


def cmd_simulate(args) -> int:
    basis = _require_basis(args)
    config = WorldConfig(
        n_subjects=args.subjects,
        frames_per_subject=args.frames,
        landmark_noise_px=args.noise,
        seed=args.seed,
    )
    if args.anisotropic:
        config = anisotropy_scenario(basis, config)
    world = build_world(basis, config)
    runner = ExperimentRunner(world, n_heldout=args.heldout)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    metrics = [args.metric] if args.metric != "both" else list(METRICS)
    rows = []
    for metric in metrics:
        base = runner.condition_metrics("base", args.k, metric, config.landmark_noise_px)
        rows.append(base)
        if args.per_subject:
            rows.extend(
                runner.per_subject_metrics("base", args.k, metric, config.landmark_noise_px)
            )

    # Base-condition artifacts come from the first requested metric.
    genuine, fake = runner.pooled_distances(args.k, metrics[0], config.landmark_noise_px)
    calibration = calibrate_threshold(genuine, fake)
    write_calibration_report(calibration, out / "calibration.json")
    save_distance_histogram(
        genuine, fake, out / "distance_hist.png", calibration.threshold
    )

    if args.ladder:
        sigmas = [c.landmark_noise_px for c in laundering_ladder(config)]
        ladder_rows = []
        for metric in metrics:
            ladder_rows.extend(runner.ladder_metrics("ladder", args.k, metric, sigmas))
        rows.extend(ladder_rows)
        save_ladder_curve(ladder_rows, out / "ladder_acc.png")

    if args.ablate_k:
        ks = [int(v) for v in args.ablate_k.split(",") if v.strip()]
        ablation_rows = runner.k_ablation_metrics(ks, metrics[0], config.landmark_noise_px)
        rows.extend(ablation_rows)
        save_k_curve(ablation_rows, out / "ablate_k.png")

    write_metrics_csv(rows, out / "metrics.csv")
    write_document(
        {"format_version": 1, "conditions": [r.as_record() for r in rows]},
        out / "metrics.json",
    )
    files = _write_world_frames(world, out, args.heldout)
    write_world_manifest(world, out / "world_manifest.json", files)

    for row in rows:
        print(
            f"{row.condition:>16} sigma={row.sigma:<6g} metric={row.metric:<12} "
            f"k={row.k:<3d} acc={row.acc_overall:.4f} auc={row.auc:.4f}"
        )
    print(f"wrote metrics, manifest, frames, and figures to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faceshape",
        description="Face-swap detection from 3D facial-shape consistency",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("basis", help="synthesize and write a shape basis")
    p.add_argument("--out", required=True)
    p.add_argument("--landmarks", type=int, default=68)
    p.add_argument("--kid", type=int, default=40)
    p.add_argument("--kexp", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_basis)

    p = sub.add_parser("enroll", help="fit frames and enroll a subject template")
    _basis_argument(p)
    p.add_argument("--frames", nargs="+", required=True)
    p.add_argument("--subject", required=True)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--min-frames", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("verify", help="verify frames against a template")
    _basis_argument(p)
    p.add_argument("--template", required=True)
    p.add_argument("--frames", nargs="+", required=True)
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--aggregation", choices=["majority", "mean"], default="majority")
    p.add_argument("--metric", choices=list(METRICS), default=METRIC_MAHALANOBIS)
    p.add_argument("--out", help="directory for the report, CSV, and figures")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("calibrate", help="tune the decision threshold")
    _basis_argument(p)
    p.add_argument("--genuine-scores")
    p.add_argument("--fake-scores")
    p.add_argument("--genuine-frames", nargs="+")
    p.add_argument("--fake-frames", nargs="+")
    p.add_argument("--template")
    p.add_argument("--out", help="directory for the report and histogram")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("simulate", help="run a synthetic-world experiment")
    _basis_argument(p)
    p.add_argument("--subjects", type=int, default=50)
    p.add_argument("--frames", type=int, default=100, help="enrollment frames per subject")
    p.add_argument("--heldout", type=int, default=50, help="held-out frames per subject")
    p.add_argument("--noise", type=float, default=0.5, help="landmark noise sigma in px")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--out", required=True)
    p.add_argument("--ladder", action="store_true", help="sweep the laundering noise ladder")
    p.add_argument("--anisotropic", action="store_true", help="anisotropic identity jitter")
    p.add_argument("--ablate-k", help="comma-separated feature dimensions, e.g. 20,40,60,80,100")
    p.add_argument("--metric", choices=[*METRICS, "both"], default=METRIC_MAHALANOBIS)
    p.add_argument("--per-subject", action="store_true",
                   help="also calibrate and report per subject")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FaceShapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - defensive
        log.exception("internal error: %s", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
