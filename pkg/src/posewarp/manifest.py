"""Line-delimited dataset manifests.

One record per line, 11 tab-separated columns, no header:

    entry_id  source_id  path  word  split  frame_count
    mean_abs_yaw  mean_abs_pitch  delta_yaw  delta_pitch  seed

``source_id`` is "-" for original (non-augmented) entries; the pose-increment
columns (delta_yaw, delta_pitch, seed) are "-" for them as well.  The pose
summary columns are "-" until a fit pass fills them.  Paths are relative to
the manifest file's directory.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

from .errors import ManifestError

N_COLUMNS = 11
MISSING = "-"


@dataclass(frozen=True)
class ManifestEntry:
    entry_id: str
    path: str
    word: str
    split: str
    frame_count: int
    source_id: str | None = None
    mean_abs_yaw: float | None = None
    mean_abs_pitch: float | None = None
    delta_yaw: float | None = None
    delta_pitch: float | None = None
    seed: int | None = None

    def with_pose(self, mean_abs_yaw: float, mean_abs_pitch: float) -> "ManifestEntry":
        return replace(self, mean_abs_yaw=mean_abs_yaw, mean_abs_pitch=mean_abs_pitch)


def _fmt_float(v: float | None) -> str:
    return MISSING if v is None else f"{v:.6f}"


def _fmt_opt(v) -> str:
    return MISSING if v is None else str(v)


def entry_to_line(e: ManifestEntry) -> str:
    fields = [
        e.entry_id,
        _fmt_opt(e.source_id),
        e.path,
        e.word,
        e.split,
        str(e.frame_count),
        _fmt_float(e.mean_abs_yaw),
        _fmt_float(e.mean_abs_pitch),
        _fmt_float(e.delta_yaw),
        _fmt_float(e.delta_pitch),
        _fmt_opt(e.seed),
    ]
    return "\t".join(fields)


def _parse_float(token: str, what: str, line_no: int) -> float | None:
    if token == MISSING:
        return None
    try:
        return float(token)
    except ValueError:
        raise ManifestError(f"line {line_no}: bad {what}: {token!r}") from None


def entry_from_line(line: str, line_no: int = 0) -> ManifestEntry:
    fields = line.rstrip("\n").split("\t")
    if len(fields) != N_COLUMNS:
        raise ManifestError(f"line {line_no}: expected {N_COLUMNS} columns, got {len(fields)}")
    try:
        frame_count = int(fields[5])
    except ValueError:
        raise ManifestError(f"line {line_no}: bad frame_count: {fields[5]!r}") from None
    seed = None
    if fields[10] != MISSING:
        try:
            seed = int(fields[10])
        except ValueError:
            raise ManifestError(f"line {line_no}: bad seed: {fields[10]!r}") from None
    return ManifestEntry(
        entry_id=fields[0],
        source_id=None if fields[1] == MISSING else fields[1],
        path=fields[2],
        word=fields[3],
        split=fields[4],
        frame_count=frame_count,
        mean_abs_yaw=_parse_float(fields[6], "mean_abs_yaw", line_no),
        mean_abs_pitch=_parse_float(fields[7], "mean_abs_pitch", line_no),
        delta_yaw=_parse_float(fields[8], "delta_yaw", line_no),
        delta_pitch=_parse_float(fields[9], "delta_pitch", line_no),
        seed=seed,
    )


def read_manifest(path) -> list[ManifestEntry]:
    entries = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            entry = entry_from_line(line, i)
            if entry.entry_id in seen:
                raise ManifestError(f"line {i}: duplicate entry_id {entry.entry_id!r}")
            seen.add(entry.entry_id)
            entries.append(entry)
    return entries


def write_manifest(entries, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = "".join(entry_to_line(e) + "\n" for e in entries)
    path.write_text(text, encoding="utf-8")


def resolve_path(manifest_path, entry: ManifestEntry) -> Path:
    """Entry paths are relative to the manifest's directory."""
    return (Path(manifest_path).parent / entry.path).resolve()
