"""Overall and pose-binned accuracy from prediction files and pose summaries.

Sequences are grouped by the mean absolute yaw/pitch recorded in the
manifest into five bins: [0,15), [15,30), [30,45), [45,60), [60,90]
(values above 90 clamp into the last bin).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidArgumentError, ManifestError

BIN_EDGES = (0.0, 15.0, 30.0, 45.0, 60.0, 90.0)
N_BINS = 5


@dataclass(frozen=True)
class PredictionRecord:
    entry_id: str
    predicted_label: str
    true_label: str

    @property
    def correct(self) -> bool:
        return self.predicted_label == self.true_label


@dataclass(frozen=True)
class PoseBin:
    lo: float
    hi: float
    count: int
    correct: int

    @property
    def accuracy(self) -> float | None:
        if self.count == 0:
            return None
        return 100.0 * self.correct / self.count


@dataclass(frozen=True)
class PoseBinTable:
    axis: str  # "yaw" or "pitch"
    bins: tuple


@dataclass(frozen=True)
class EvalReport:
    total: int
    correct: int
    overall_accuracy: float
    yaw_table: PoseBinTable
    pitch_table: PoseBinTable


def sequence_pose(per_frame_poses) -> tuple[float, float]:
    """Mean absolute yaw and pitch over a sequence's per-frame poses, degrees."""
    poses = list(per_frame_poses)
    if not poses:
        raise InvalidArgumentError("pose list is empty")
    yaw = sum(abs(p.yaw) for p in poses) / len(poses)
    pitch = sum(abs(p.pitch) for p in poses) / len(poses)
    return yaw, pitch


def pose_bin(angle_abs: float) -> int:
    """Bin index 0..4 for an absolute angle; angles above 90 clamp to bin 4."""
    if angle_abs < 0:
        raise InvalidArgumentError(f"absolute angle must be >= 0, got {angle_abs}")
    for i in range(N_BINS - 1):
        if angle_abs < BIN_EDGES[i + 1]:
            return i
    return N_BINS - 1


def read_predictions(path) -> list[PredictionRecord]:
    """Parse a tab-separated predictions file (entry_id, predicted, true)."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 3:
                raise ManifestError(f"line {i}: expected 3 columns, got {len(fields)}")
            records.append(PredictionRecord(*fields))
    return records


def _tabulate(predictions, angles) -> tuple:
    bins = [[0, 0] for _ in range(N_BINS)]
    for pred, angle in zip(predictions, angles):
        b = pose_bin(angle)
        bins[b][0] += 1
        bins[b][1] += int(pred.correct)
    return tuple(
        PoseBin(lo=BIN_EDGES[i], hi=BIN_EDGES[i + 1], count=c, correct=k)
        for i, (c, k) in enumerate(bins)
    )


def evaluate(predictions, manifest_entries) -> EvalReport:
    """Score predictions against manifest pose summaries.

    Every prediction's entry_id must resolve to a manifest entry carrying
    mean-absolute pose columns; duplicates and unknown ids are errors.
    """
    predictions = list(predictions)
    if not predictions:
        raise InvalidArgumentError("no predictions to evaluate")
    seen = set()
    dups = set()
    for p in predictions:
        if p.entry_id in seen:
            dups.add(p.entry_id)
        seen.add(p.entry_id)
    if dups:
        raise ManifestError(f"duplicate entry_ids in predictions: {sorted(dups)}")

    by_id = {e.entry_id: e for e in manifest_entries}
    unknown = sorted(p.entry_id for p in predictions if p.entry_id not in by_id)
    if unknown:
        raise ManifestError(f"unknown entry_ids: {unknown}")
    missing = sorted(p.entry_id for p in predictions
                     if by_id[p.entry_id].mean_abs_yaw is None or by_id[p.entry_id].mean_abs_pitch is None)
    if missing:
        raise ManifestError(f"entries lack pose summaries (run fit first): {missing}")

    correct = sum(p.correct for p in predictions)
    total = len(predictions)
    yaw_bins = _tabulate(predictions, [by_id[p.entry_id].mean_abs_yaw for p in predictions])
    pitch_bins = _tabulate(predictions, [by_id[p.entry_id].mean_abs_pitch for p in predictions])
    return EvalReport(
        total=total,
        correct=correct,
        overall_accuracy=100.0 * correct / total,
        yaw_table=PoseBinTable(axis="yaw", bins=yaw_bins),
        pitch_table=PoseBinTable(axis="pitch", bins=pitch_bins),
    )


def _format_table(table: PoseBinTable) -> list[str]:
    header = [f"{int(b.lo)}-{int(b.hi)}" for b in table.bins]
    accs = ["n/a" if b.accuracy is None else f"{b.accuracy:.2f}" for b in table.bins]
    counts = [str(b.count) for b in table.bins]
    width = max(len(s) for s in header + accs + counts) + 2
    rows = [
        f"Accuracy (%) by {table.axis} angle",
        "".join(s.rjust(width) for s in header),
        "".join(s.rjust(width) for s in accs),
        "".join(s.rjust(width) for s in counts) + "  (count)",
    ]
    return rows


def format_report(report: EvalReport) -> str:
    lines = [f"Overall accuracy: {report.overall_accuracy:.2f}% ({report.correct}/{report.total})", ""]
    lines.extend(_format_table(report.yaw_table))
    lines.append("")
    lines.extend(_format_table(report.pitch_table))
    return "\n".join(lines) + "\n"


def report_key_values(report: EvalReport) -> str:
    """Machine-readable dump, one key=value per line."""
    lines = [
        f"total={report.total}",
        f"correct={report.correct}",
        f"overall_accuracy={report.overall_accuracy:.6f}",
    ]
    for table in (report.yaw_table, report.pitch_table):
        for i, b in enumerate(table.bins):
            prefix = f"{table.axis}_bin{i}"
            lines.append(f"{prefix}_range={int(b.lo)}-{int(b.hi)}")
            lines.append(f"{prefix}_count={b.count}")
            lines.append(f"{prefix}_correct={b.correct}")
            if b.accuracy is not None:
                lines.append(f"{prefix}_accuracy={b.accuracy:.6f}")
    return "\n".join(lines) + "\n"
