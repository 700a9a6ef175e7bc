"""Fixed-length word clip extraction from sentence-level recordings.

A word is kept only if its duration and center position allow a symmetric
29-frame window to be cut around the middle frame; kept words are later
balanced per class with capped train/val shares (overflow goes to test).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .corpus import SequenceRecord
from .errors import InvalidArgumentError
from .seeding import derive_seed

WINDOW_FRAMES = 29
HALF_WINDOW = 14
MIN_DURATION = 5
MAX_DURATION = 31
EDGE_MARGIN = 12

TRAIN_CAP = 90
VAL_CAP = 10


class Reason(str, enum.Enum):
    OK = "ok"
    TOO_SHORT = "too_short"
    TOO_LONG = "too_long"
    TOO_EARLY = "too_early"
    TOO_LATE = "too_late"


@dataclass(frozen=True)
class WordBoundary:
    """0-based inclusive frame span of one word inside a sentence."""

    word: str
    start_frame: int
    end_frame: int

    def __post_init__(self):
        if self.start_frame < 0 or self.end_frame < self.start_frame:
            raise InvalidArgumentError(
                f"bad boundary for {self.word!r}: [{self.start_frame}, {self.end_frame}]")


@dataclass(frozen=True)
class SegmentDecision:
    accepted: bool
    reason: Reason
    word: str
    i_mid: int
    window: tuple[int, int] | None  # inclusive (first, last) frame indices


def boundary_from_seconds(word: str, start_s: float, end_s: float, fps: float) -> WordBoundary:
    """Convert second-based boundaries to frames by rounding time * fps."""
    if fps <= 0:
        raise InvalidArgumentError("fps must be positive")
    return WordBoundary(
        word=word,
        start_frame=int(np.floor(start_s * fps + 0.5)),
        end_frame=int(np.floor(end_s * fps + 0.5)),
    )


def decide_segment(boundary: WordBoundary, sentence_len: int) -> SegmentDecision:
    """Accept/reject a word and place its 29-frame window.

    Rejection reasons are checked in priority order: too_short, too_long,
    too_early, too_late.  Besides the nominal center margins (i_mid <= 12,
    i_mid >= N - 12), the window must physically fit inside the sentence,
    which tightens the early/late thresholds to i_mid < 14 and
    i_mid > N - 15.
    """
    if boundary.end_frame >= sentence_len:
        raise InvalidArgumentError(
            f"boundary [{boundary.start_frame}, {boundary.end_frame}] outside sentence of {sentence_len} frames")
    i_mid = (boundary.start_frame + boundary.end_frame) // 2
    duration = boundary.end_frame - boundary.start_frame + 1

    def reject(reason: Reason) -> SegmentDecision:
        return SegmentDecision(accepted=False, reason=reason, word=boundary.word,
                               i_mid=i_mid, window=None)

    if duration < MIN_DURATION:
        return reject(Reason.TOO_SHORT)
    if duration > MAX_DURATION:
        return reject(Reason.TOO_LONG)
    if i_mid <= EDGE_MARGIN or i_mid - HALF_WINDOW < 0:
        return reject(Reason.TOO_EARLY)
    if i_mid >= sentence_len - EDGE_MARGIN or i_mid + HALF_WINDOW >= sentence_len:
        return reject(Reason.TOO_LATE)
    return SegmentDecision(accepted=True, reason=Reason.OK, word=boundary.word,
                           i_mid=i_mid, window=(i_mid - HALF_WINDOW, i_mid + HALF_WINDOW))


def extract_window(sentence: SequenceRecord, decision: SegmentDecision) -> SequenceRecord:
    """Copy the accepted 29-frame window into a labeled clip."""
    if not decision.accepted:
        raise InvalidArgumentError(f"decision for {decision.word!r} was not accepted ({decision.reason.value})")
    first, last = decision.window
    if first < 0 or last >= len(sentence.frames):
        raise InvalidArgumentError("window does not fit the provided frames")
    frames = [f.copy() for f in sentence.frames[first:last + 1]]
    landmarks = None
    if sentence.landmarks is not None:
        landmarks = [lm.copy() for lm in sentence.landmarks[first:last + 1]]
    return SequenceRecord(
        entry_id=f"{sentence.entry_id}_{decision.word}_{decision.i_mid:04d}",
        word=decision.word,
        split="",
        frames=frames,
        landmarks=landmarks,
        source_id=sentence.entry_id,
        center_frame=decision.i_mid,
    )


@dataclass(frozen=True)
class SplitResult:
    assignments: tuple       # (instance_id, word, split) triples
    counts: dict             # word -> {"train": n, "val": n, "test": n}
    rejected: tuple          # (instance_id, word, reason) triples


def balance_split(instances, vocabulary, seed: int) -> SplitResult:
    """Deterministic 8:1:1 split with per-word caps of 90 train / 10 val.

    Instances are (id, word) pairs; they are sorted by id and shuffled with a
    per-word seed, so the result is independent of input order.  Overflow
    beyond the caps moves to test; words outside the vocabulary are rejected.
    """
    vocab = set(vocabulary)
    by_word: dict[str, list[str]] = {}
    rejected = []
    for inst_id, word in instances:
        if word not in vocab:
            rejected.append((inst_id, word, "unknown_word"))
            continue
        by_word.setdefault(word, []).append(inst_id)

    assignments = []
    counts = {}
    for word in sorted(by_word):
        ids = sorted(by_word[word])
        rng = np.random.default_rng(derive_seed(seed, word))
        order = rng.permutation(len(ids))
        shuffled = [ids[i] for i in order]

        n = len(shuffled)
        n_train = (8 * n) // 10
        n_val = n // 10
        train = shuffled[:n_train]
        val = shuffled[n_train:n_train + n_val]
        test = shuffled[n_train + n_val:]
        test = train[TRAIN_CAP:] + val[VAL_CAP:] + test
        train = train[:TRAIN_CAP]
        val = val[:VAL_CAP]

        counts[word] = {"train": len(train), "val": len(val), "test": len(test)}
        assignments.extend((i, word, "train") for i in train)
        assignments.extend((i, word, "val") for i in val)
        assignments.extend((i, word, "test") for i in test)

    return SplitResult(assignments=tuple(assignments), counts=counts, rejected=tuple(rejected))
