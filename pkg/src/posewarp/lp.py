"""Large-pose dataset construction.

Each input video gets exactly one augmented copy: a per-video yaw/pitch
increment is sampled uniformly inside the allowed ranges, with its sign
forced to match the fitted pose of the video's first frame, and every frame
is re-rendered with that same increment.  Per-video seeds are derived from
the global seed and the video id, so results do not depend on processing
order.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .corpus import SequenceRecord, load_sequence, save_sequence
from .errors import InvalidArgumentError, ManifestError, PosewarpError, VideoSkipped
from .fitting import FitConfig, fit_sequence
from .manifest import ManifestEntry, read_manifest, resolve_path, write_manifest
from .morphable import (
    MorphableModel,
    PoseAngles,
    euler_from_rotation,
    pose_to_camera,
    reconstruct_shape,
    rotation_from_euler,
)
from .render import render_new_pose
from .seeding import derive_seed

logger = logging.getLogger(__name__)

YAW_RANGE = 45.0
PITCH_RANGE = 30.0

MAX_SKIP_FRACTION = 0.10

AUGMENT_SUFFIX = "_lp"


@dataclass(frozen=True)
class PoseIncrement:
    """Per-video pose increment in degrees, plus the seed that produced it."""

    delta_yaw: float
    delta_pitch: float
    seed_used: int

    def __post_init__(self):
        if abs(self.delta_yaw) > YAW_RANGE:
            raise InvalidArgumentError(f"|delta_yaw| > {YAW_RANGE}: {self.delta_yaw}")
        if abs(self.delta_pitch) > PITCH_RANGE:
            raise InvalidArgumentError(f"|delta_pitch| > {PITCH_RANGE}: {self.delta_pitch}")


def sample_pose_increment(rng_seed: int, first_frame_pose: PoseAngles) -> PoseIncrement:
    """Uniform increment with signs locked to the first frame's pose.

    Zero yaw or pitch counts as positive, so the increment is then
    non-negative on that axis.
    """
    rng = np.random.default_rng(rng_seed)
    yaw_mag = rng.uniform(0.0, YAW_RANGE)
    pitch_mag = rng.uniform(0.0, PITCH_RANGE)
    yaw_sign = 1.0 if first_frame_pose.yaw >= 0 else -1.0
    pitch_sign = 1.0 if first_frame_pose.pitch >= 0 else -1.0
    return PoseIncrement(
        delta_yaw=yaw_sign * yaw_mag,
        delta_pitch=pitch_sign * pitch_mag,
        seed_used=int(rng_seed),
    )


def _rotated_landmarks(model: MorphableModel, params, increment: PoseIncrement) -> np.ndarray:
    """2D landmark positions after the scene rotation (same pivot as the render)."""
    shape = reconstruct_shape(model, params.id_coeffs, params.exp_coeffs)
    cam = pose_to_camera(shape, params)
    pivot = cam.mean(axis=1, keepdims=True)
    R = rotation_from_euler(PoseAngles(yaw=increment.delta_yaw, pitch=increment.delta_pitch))
    rotated = R @ (cam - pivot) + pivot
    return rotated[:2, model.landmark_indices]


def augment_video(video: SequenceRecord, model: MorphableModel, fits,
                  increment: PoseIncrement, grid_step: int = 16) -> SequenceRecord:
    """Render every frame of a video at the shared pose increment.

    Landmarks of the output frames are the rotated camera-space landmark
    positions, consistent with the rendered geometry.  Raises VideoSkipped
    when any frame's fit failed.
    """
    fits = list(fits)
    if len(fits) != len(video.frames):
        raise InvalidArgumentError("fits length must equal frame count")
    for k, fit in enumerate(fits):
        if fit.params is None or not fit.converged:
            raise VideoSkipped(f"frame {k}: fit {'failed' if fit.params is None else 'did not converge'}")

    out_frames = []
    out_landmarks = []
    delta = (increment.delta_yaw, increment.delta_pitch)
    for frame, lm, fit in zip(video.frames, video.landmarks or [None] * len(fits), fits):
        out_frames.append(render_new_pose(frame, lm, model, fit, delta, grid_step=grid_step))
        out_landmarks.append(_rotated_landmarks(model, fit.params, increment))
    return SequenceRecord(
        entry_id=video.entry_id + AUGMENT_SUFFIX,
        word=video.word,
        split=video.split,
        frames=out_frames,
        landmarks=out_landmarks,
        source_id=video.entry_id,
    )


def _mean_abs_pose(rotations) -> tuple[float, float]:
    yaws, pitches = [], []
    for R in rotations:
        ang = euler_from_rotation(R)
        yaws.append(abs(ang.yaw))
        pitches.append(abs(ang.pitch))
    return float(np.mean(yaws)), float(np.mean(pitches))


def build_lp(manifest_in, model: MorphableModel, seed: int, out_dir,
             fit_config: FitConfig | None = None, grid_step: int = 16,
             workers: int = 1) -> list[ManifestEntry]:
    """Augment every video in a manifest once; write frames and a new manifest.

    The output manifest (out_dir/manifest.tsv) lists each original entry
    followed by its augmented entry, ordered by entry id.  Unreadable or
    unfittable videos are skipped (logged): their original entry is kept but
    no augmented copy appears, so |out| = 2|in| - skips.  More than 10% skips
    fails the build.  Per-video seeding makes the result independent of
    ``workers``.
    """
    manifest_in = Path(manifest_in)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = read_manifest(manifest_in)
    ordered = sorted(entries, key=lambda e: e.entry_id)

    def augment_one(entry: ManifestEntry):
        try:
            return entry, _augment_entry(entry, manifest_in, model, seed, out_dir,
                                         fit_config, grid_step), None
        except (PosewarpError, OSError) as exc:
            return entry, None, str(exc)

    if workers <= 1:
        results = [augment_one(e) for e in ordered]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(augment_one, ordered))

    out_entries: list[ManifestEntry] = []
    skips: list[tuple[str, str]] = []
    for entry, pair, err in results:
        if err is not None:
            logger.warning("skipping %s: %s", entry.entry_id, err)
            skips.append((entry.entry_id, err))
            src_dir = resolve_path(manifest_in, entry)
            out_entries.append(replace(entry, path=os.path.relpath(src_dir, out_dir)))
            continue
        out_entries.extend(pair)

    if entries and len(skips) / len(entries) > MAX_SKIP_FRACTION:
        detail = "; ".join(f"{eid}: {why}" for eid, why in skips)
        raise ManifestError(f"{len(skips)}/{len(entries)} videos skipped (> {MAX_SKIP_FRACTION:.0%}): {detail}")

    write_manifest(out_entries, out_dir / "manifest.tsv")
    return out_entries


def _augment_entry(entry: ManifestEntry, manifest_in: Path, model: MorphableModel,
                   seed: int, out_dir: Path, fit_config, grid_step: int):
    src_dir = resolve_path(manifest_in, entry)
    video = load_sequence(src_dir, entry.entry_id, entry.word, entry.split)
    if video.landmarks is None:
        raise VideoSkipped("missing landmark sidecars")

    fits = fit_sequence(model, video.landmarks, fit_config)
    failed = [i for i, f in enumerate(fits) if f.params is None]
    if failed:
        raise VideoSkipped(f"fit failed on frames {failed}")

    first_pose = euler_from_rotation(fits[0].params.rotation)
    video_seed = derive_seed(seed, entry.entry_id)
    increment = sample_pose_increment(video_seed, first_pose)

    augmented = augment_video(video, model, fits, increment, grid_step=grid_step)
    aug_dir = out_dir / augmented.entry_id
    save_sequence(augmented, aug_dir)

    rotations = [f.params.rotation for f in fits]
    orig_yaw, orig_pitch = _mean_abs_pose(rotations)
    r_delta = rotation_from_euler(PoseAngles(yaw=increment.delta_yaw, pitch=increment.delta_pitch))
    aug_yaw, aug_pitch = _mean_abs_pose([r_delta @ R for R in rotations])

    original = ManifestEntry(
        entry_id=entry.entry_id,
        source_id=None,
        path=os.path.relpath(src_dir, out_dir),
        word=entry.word,
        split=entry.split,
        frame_count=len(video.frames),
        mean_abs_yaw=orig_yaw,
        mean_abs_pitch=orig_pitch,
    )
    aug_entry = ManifestEntry(
        entry_id=augmented.entry_id,
        source_id=entry.entry_id,
        path=augmented.entry_id,
        word=entry.word,
        split=entry.split,
        frame_count=len(augmented.frames),
        mean_abs_yaw=aug_yaw,
        mean_abs_pitch=aug_pitch,
        delta_yaw=increment.delta_yaw,
        delta_pitch=increment.delta_pitch,
        seed=increment.seed_used,
    )
    return [original, aug_entry]
