"""Command-line entry point: fit, build-lp, preprocess, segment, evaluate.

Every subcommand is deterministic for a fixed ``--seed`` and produces output
independent of ``--workers`` (videos are processed in a pool and merged in
entry-id order).  Failures of individual videos are reported as
``skip\\t<id>\\t<reason>`` lines on stderr; hard errors as
``error\\t<type>\\t<message>`` with a nonzero exit code.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .evaluate import evaluate as evaluate_predictions
from .evaluate import format_report, read_predictions, report_key_values, sequence_pose
from .corpus import load_landmark_sequence, load_sequence, save_sequence
from .errors import ManifestError, PosewarpError
from .fitting import FitConfig, fit_sequence
from .imageops import save_image
from .lp import build_lp
from .manifest import ManifestEntry, read_manifest, resolve_path, write_manifest
from .model_io import load_model
from .morphable import euler_from_rotation
from .preprocess import (
    Aug2DConfig,
    MOUTH_LANDMARKS,
    align_face,
    apply_plan,
    crop_mouth,
    default_reference,
    make_video_plan,
)
from .seeding import derive_seed
from .segment import WordBoundary, balance_split, boundary_from_seconds, decide_segment, extract_window

logger = logging.getLogger(__name__)

MAX_FAIL_FRACTION = 0.10


def _pool_map(fn, items, workers: int):
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _report_skips(skips) -> None:
    for entry_id, reason in sorted(skips):
        sys.stderr.write(f"skip\t{entry_id}\t{reason}\n")


def _fail_exit_code(n_failed: int, n_total: int) -> int:
    if n_total == 0:
        return 0
    return 0 if n_failed / n_total <= MAX_FAIL_FRACTION else 1


def cmd_fit(args) -> int:
    model = load_model(args.model)
    entries = read_manifest(args.manifest)
    config = FitConfig()

    def fit_one(entry: ManifestEntry):
        try:
            landmarks = load_landmark_sequence(resolve_path(args.manifest, entry))
            fits = fit_sequence(model, landmarks, config)
            bad = [i for i, f in enumerate(fits) if f.params is None]
            if bad:
                return entry, None, f"fit failed on frames {bad}"
            poses = [euler_from_rotation(f.params.rotation) for f in fits]
            return entry, sequence_pose(poses), None
        except (PosewarpError, OSError) as exc:
            return entry, None, str(exc)

    results = _pool_map(fit_one, entries, args.workers)
    out_entries = []
    skips = []
    for entry, pose, err in sorted(results, key=lambda r: r[0].entry_id):
        if err is not None:
            skips.append((entry.entry_id, err))
            out_entries.append(entry)
        else:
            out_entries.append(entry.with_pose(*pose))
    write_manifest(out_entries, args.out)
    _report_skips(skips)
    return _fail_exit_code(len(skips), len(entries))


def cmd_build_lp(args) -> int:
    model = load_model(args.model)
    build_lp(args.manifest, model, args.seed, args.out_dir,
             grid_step=args.grid_step, workers=args.workers)
    return 0


def cmd_preprocess(args) -> int:
    entries = read_manifest(args.manifest)
    reference = default_reference()
    config = Aug2DConfig(
        enable_scale=args.aug2d,
        enable_degrade=args.aug2d,
        enable_patches=args.aug2d,
        seed=args.seed,
    )
    out_dir = Path(args.out_dir)

    def preprocess_one(entry: ManifestEntry):
        try:
            video = load_sequence(resolve_path(args.manifest, entry), entry.entry_id,
                                  entry.word, entry.split)
            if video.landmarks is None:
                return entry, None, "missing landmark sidecars"
            plan = make_video_plan(config, derive_seed(args.seed, entry.entry_id))
            rois = []
            for frame, lm in zip(video.frames, video.landmarks):
                aligned, moved = align_face(frame, lm, reference)
                roi = crop_mouth(aligned, moved[:, list(MOUTH_LANDMARKS)])
                rois.append(apply_plan(roi, plan, config.crop_size))
            clip_dir = out_dir / entry.entry_id
            clip_dir.mkdir(parents=True, exist_ok=True)
            for i, roi in enumerate(rois):
                save_image(roi, clip_dir / f"{i:04d}.png")
            out_entry = ManifestEntry(
                entry_id=entry.entry_id,
                source_id=entry.source_id,
                path=entry.entry_id,
                word=entry.word,
                split=entry.split,
                frame_count=len(rois),
                mean_abs_yaw=entry.mean_abs_yaw,
                mean_abs_pitch=entry.mean_abs_pitch,
                delta_yaw=entry.delta_yaw,
                delta_pitch=entry.delta_pitch,
                seed=entry.seed,
            )
            return entry, out_entry, None
        except (PosewarpError, OSError) as exc:
            return entry, None, str(exc)

    results = _pool_map(preprocess_one, entries, args.workers)
    out_entries = []
    skips = []
    for entry, out_entry, err in sorted(results, key=lambda r: r[0].entry_id):
        if err is not None:
            skips.append((entry.entry_id, err))
        else:
            out_entries.append(out_entry)
    write_manifest(out_entries, out_dir / "manifest.tsv")
    _report_skips(skips)
    return _fail_exit_code(len(skips), len(entries))


def _parse_sentence_line(line: str, line_no: int):
    fields = line.rstrip("\n").split("\t")
    if len(fields) < 4:
        raise ManifestError(f"line {line_no}: expected at least 4 columns")
    sid, path, fps_s, n_s = fields[:4]
    try:
        fps = float(fps_s)
        n_total = int(n_s)
    except ValueError:
        raise ManifestError(f"line {line_no}: bad fps/frame count") from None
    boundaries = []
    for token in fields[4:]:
        if not token:
            continue
        parts = token.split(":")
        if len(parts) != 3:
            raise ManifestError(f"line {line_no}: bad boundary token {token!r}")
        word, start_s, end_s = parts
        if "." in start_s or "." in end_s:
            boundaries.append(boundary_from_seconds(word, float(start_s), float(end_s), fps))
        else:
            boundaries.append(WordBoundary(word, int(start_s), int(end_s)))
    return sid, path, n_total, boundaries


def cmd_segment(args) -> int:
    vocabulary = {w.strip() for w in Path(args.vocab).read_text().split() if w.strip()}
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    sentences = []
    with open(args.sentences, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if line.strip():
                sentences.append(_parse_sentence_line(line, i))

    def segment_one(sentence):
        sid, path, n_total, boundaries = sentence
        clips, rejections = [], []
        record = load_sequence(Path(args.sentences).parent / path, sid)
        if len(record.frames) != n_total:
            raise ManifestError(f"{sid}: manifest says {n_total} frames, found {len(record.frames)}")
        for boundary in boundaries:
            decision = decide_segment(boundary, n_total)
            if not decision.accepted:
                rejections.append((sid, boundary.word, decision.reason.value))
                continue
            clips.append(extract_window(record, decision))
        return clips, rejections

    results = _pool_map(segment_one, sentences, args.workers)
    clips = [c for cl, _ in results for c in cl]
    rejections = [r for _, rj in results for r in rj]

    split = balance_split([(c.entry_id, c.word) for c in clips], vocabulary, args.seed)
    split_of = {inst_id: s for inst_id, _, s in split.assignments}
    clip_by_id = {c.entry_id: c for c in clips}
    for inst_id, word, reason in split.rejected:
        rejections.append((clip_by_id[inst_id].source_id or "", word, reason))

    out_entries = []
    for clip in sorted(clips, key=lambda c: c.entry_id):
        if clip.entry_id not in split_of:
            continue
        clip.split = split_of[clip.entry_id]
        save_sequence(clip, out_dir / clip.entry_id)
        out_entries.append(ManifestEntry(
            entry_id=clip.entry_id,
            source_id=clip.source_id,
            path=clip.entry_id,
            word=clip.word,
            split=clip.split,
            frame_count=len(clip.frames),
        ))
    write_manifest(out_entries, out_dir / "manifest.tsv")
    rej_lines = "".join(f"{s}\t{w}\t{r}\n" for s, w, r in sorted(rejections))
    (out_dir / "rejections.tsv").write_text(rej_lines, encoding="utf-8")
    return 0


def cmd_evaluate(args) -> int:
    entries = read_manifest(args.manifest)
    predictions = read_predictions(args.predictions)
    report = evaluate_predictions(predictions, entries)
    sys.stdout.write(format_report(report))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(report_key_values(report), encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="posewarp",
                                     description="Pose augmentation pipeline for visual speech data")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0, help="global random seed (default 0)")
        p.add_argument("--workers", type=int, default=1, help="parallel videos (default 1)")

    p = sub.add_parser("fit", help="fit the morphable model to every video's landmarks")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="output manifest with pose columns filled")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("build-lp", help="render one pose-augmented copy of every video")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--grid-step", type=int, default=16, help="background anchor spacing, px")
    p.set_defaults(func=cmd_build_lp)

    p = sub.add_parser("preprocess", help="align faces, crop mouth ROIs, apply 2D augmentations")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--aug2d", action="store_true",
                   help="enable the extra scale/degrade/noise-patch augmentations")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("segment", help="extract 29-frame word clips from sentences")
    common(p)
    p.add_argument("--sentences", required=True, help="sentence manifest")
    p.add_argument("--vocab", required=True, help="vocabulary file, one word per line")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("evaluate", help="overall and pose-binned accuracy tables")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", help="write machine-readable key=value report here")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except PosewarpError as exc:
        sys.stderr.write(f"error\t{type(exc).__name__}\t{exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error\tOSError\t{exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
