"""On-disk video clips: directories of numbered PNG frames plus landmark sidecars.

A clip directory holds ``0000.png, 0001.png, ...`` and, when landmarks are
available, one ``0000.txt`` sidecar per frame with 68 ``x y`` rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, ManifestError
from .imageops import load_image, save_image
from .morphable import N_LANDMARKS


@dataclass
class SequenceRecord:
    """An ordered clip: frames, per-frame landmarks, and label metadata."""

    entry_id: str
    word: str
    split: str
    frames: list = field(default_factory=list)          # (H, W, 3) uint8 arrays
    landmarks: list | None = None                       # (2, 68) arrays, or None
    source_id: str | None = None
    center_frame: int | None = None

    def __len__(self) -> int:
        return len(self.frames)


def _frame_name(i: int) -> str:
    return f"{i:04d}.png"


def _sidecar_name(i: int) -> str:
    return f"{i:04d}.txt"


def save_landmarks(lm: np.ndarray, path) -> None:
    lm = np.asarray(lm, dtype=np.float64)
    if lm.shape != (2, N_LANDMARKS):
        raise InvalidArgumentError(f"landmarks must be 2 x {N_LANDMARKS}, got {lm.shape}")
    np.savetxt(path, lm.T, fmt="%.6f")


def load_landmark_file(path) -> np.ndarray:
    pts = np.loadtxt(path, dtype=np.float64)
    if pts.shape != (N_LANDMARKS, 2):
        raise ManifestError(f"{path}: expected {N_LANDMARKS} 'x y' rows, got shape {pts.shape}")
    return pts.T


def save_sequence(record: SequenceRecord, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(record.frames):
        save_image(frame, directory / _frame_name(i))
        if record.landmarks is not None:
            save_landmarks(record.landmarks[i], directory / _sidecar_name(i))


def load_sequence(directory, entry_id: str, word: str = "", split: str = "",
                  with_frames: bool = True) -> SequenceRecord:
    """Load a clip directory; landmark sidecars are read when present."""
    directory = Path(directory)
    frame_paths = sorted(directory.glob("[0-9][0-9][0-9][0-9].png"))
    if not frame_paths:
        raise ManifestError(f"{directory}: no numbered frames found")
    frames = [load_image(p) for p in frame_paths] if with_frames else [None] * len(frame_paths)
    landmarks = None
    sidecars = [p.with_suffix(".txt") for p in frame_paths]
    if all(p.exists() for p in sidecars):
        landmarks = [load_landmark_file(p) for p in sidecars]
    return SequenceRecord(
        entry_id=entry_id,
        word=word,
        split=split,
        frames=frames,
        landmarks=landmarks,
    )


def load_landmark_sequence(directory) -> list:
    """Landmarks only (for fitting), one (2, 68) array per numbered frame."""
    directory = Path(directory)
    sidecars = sorted(directory.glob("[0-9][0-9][0-9][0-9].txt"))
    if not sidecars:
        raise ManifestError(f"{directory}: no landmark sidecars found")
    return [load_landmark_file(p) for p in sidecars]
