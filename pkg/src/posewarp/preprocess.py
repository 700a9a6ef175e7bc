"""Face alignment, mouth-ROI extraction, and video-level 2D augmentations.

All augmentation randomness is drawn once per video into an AugPlan; every
frame of the video then goes through the identical plan.  Random cropping
and horizontal flipping are always part of a plan; scaling, degradation, and
noise patches are the optional extras toggled by the config flags.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AlignmentDegenerateError, InvalidArgumentError, SizeError
from .imageops import resize_bilinear, sample_bilinear, to_u8, validate_image

# iBUG 68-point indices: outer/inner eye corners and nose tip.
ALIGN_LANDMARKS = (36, 39, 42, 45, 33)
MOUTH_LANDMARKS = tuple(range(48, 68))

ROI_SIZE = 96
CROP_SIZE = 88

_COLLINEAR_RTOL = 1e-9


@dataclass(frozen=True)
class AlignmentReference:
    """Canonical positions of the five alignment landmarks, plus frame size."""

    points: np.ndarray  # (2, 5): left outer, left inner, right inner, right outer, nose tip
    width: int
    height: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.shape != (2, 5):
            raise InvalidArgumentError(f"reference points must be 2 x 5, got {pts.shape}")
        object.__setattr__(self, "points", pts)
        if self.width < 1 or self.height < 1:
            raise InvalidArgumentError("reference frame size must be positive")
        centered = pts - pts.mean(axis=1, keepdims=True)
        sv = np.linalg.svd(centered, compute_uv=False)
        if sv[-1] <= _COLLINEAR_RTOL * sv[0]:
            raise InvalidArgumentError("reference points are collinear")


def default_reference() -> AlignmentReference:
    """A 256x256 canonical frame with the mouth region inside the lower half."""
    pts = np.array([
        [78.0, 112.0, 144.0, 178.0, 128.0],   # x
        [100.0, 100.0, 100.0, 100.0, 150.0],  # y
    ])
    return AlignmentReference(points=pts, width=256, height=256)


def similarity_from_points(src: np.ndarray, dst: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Least-squares similarity (scale, rotation, translation) mapping src to dst.

    Standard Procrustes solution without reflection; raises when the source
    points are collinear.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[0] != 2:
        raise InvalidArgumentError("point sets must both be 2 x K")
    if not (np.isfinite(src).all() and np.isfinite(dst).all()):
        raise InvalidArgumentError("alignment points must be finite")
    mu_s = src.mean(axis=1, keepdims=True)
    mu_d = dst.mean(axis=1, keepdims=True)
    sc = src - mu_s
    dc = dst - mu_d
    var_s = (sc ** 2).sum() / src.shape[1]
    sv = np.linalg.svd(sc, compute_uv=False)
    if var_s <= 0 or sv[-1] <= _COLLINEAR_RTOL * sv[0]:
        raise AlignmentDegenerateError("alignment landmarks are collinear")

    cov = dc @ sc.T / src.shape[1]
    U, S, Vt = np.linalg.svd(cov)
    d = np.sign(np.linalg.det(U @ Vt))
    D = np.diag([1.0, d])
    R = U @ D @ Vt
    scale = float(np.trace(np.diag(S) @ D) / var_s)
    t = (mu_d - scale * R @ mu_s).ravel()
    return scale, R, t


def _warp_similarity(img: np.ndarray, scale: float, R: np.ndarray, t: np.ndarray,
                     out_w: int, out_h: int) -> np.ndarray:
    """Inverse-map warp: out pixel centers back through the similarity, zero fill."""
    h, w = img.shape[:2]
    xs = np.arange(out_w) + 0.5
    ys = np.arange(out_h) + 0.5
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel() - t[0], gy.ravel() - t[1]])
    src = (R.T @ pts) / scale
    u = src[0].reshape(out_h, out_w)
    v = src[1].reshape(out_h, out_w)
    samples = sample_bilinear(img, u - 0.5, v - 0.5)
    inside = (u >= 0.0) & (u <= w) & (v >= 0.0) & (v <= h)
    out = to_u8(samples)
    out[~inside] = 0
    return out


def align_face(frame: np.ndarray, landmarks68: np.ndarray,
               reference: AlignmentReference) -> tuple[np.ndarray, np.ndarray]:
    """Map the frame onto the reference via the five alignment landmarks.

    Returns the resampled image (reference frame size) and all 68 landmarks
    pushed through the same similarity transform.
    """
    img = validate_image(frame)
    lm = np.asarray(landmarks68, dtype=np.float64)
    if lm.shape != (2, 68):
        raise InvalidArgumentError(f"landmarks must be 2 x 68, got {lm.shape}")
    src = lm[:, list(ALIGN_LANDMARKS)]
    scale, R, t = similarity_from_points(src, reference.points)
    warped = _warp_similarity(img, scale, R, t, reference.width, reference.height)
    moved = scale * R @ lm + t[:, None]
    return warped, moved


def crop_mouth(aligned: np.ndarray, mouth_landmarks: np.ndarray) -> np.ndarray:
    """96x96 crop centered on the mouth-landmark centroid, clamped to the image."""
    img = validate_image(aligned)
    h, w = img.shape[:2]
    if h < ROI_SIZE or w < ROI_SIZE:
        raise SizeError(f"image {w}x{h} smaller than {ROI_SIZE}x{ROI_SIZE}")
    pts = np.asarray(mouth_landmarks, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] != 2 or pts.shape[1] == 0:
        raise InvalidArgumentError("mouth landmarks must be 2 x K")
    cx, cy = pts.mean(axis=1)
    col = int(np.floor(cx + 0.5)) - ROI_SIZE // 2
    row = int(np.floor(cy + 0.5)) - ROI_SIZE // 2
    col = min(max(col, 0), w - ROI_SIZE)
    row = min(max(row, 0), h - ROI_SIZE)
    return img[row:row + ROI_SIZE, col:col + ROI_SIZE]


@dataclass(frozen=True)
class Aug2DConfig:
    """Augmentation toggles and the sampling ranges (video-level)."""

    enable_scale: bool = True
    enable_degrade: bool = True
    enable_patches: bool = True
    scale_range: tuple[float, float] = (0.8, 1.2)
    degrade_range: tuple[float, float] = (0.4, 0.8)
    patch_frac_range: tuple[float, float] = (0.1, 0.4)
    patch_count_range: tuple[int, int] = (1, 3)
    crop_size: int = CROP_SIZE
    flip_prob: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("scale_range", "degrade_range", "patch_frac_range"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise InvalidArgumentError(f"{name} must satisfy 0 < lo <= hi")
        lo, hi = self.patch_count_range
        if not (1 <= lo <= hi):
            raise InvalidArgumentError("patch_count_range must satisfy 1 <= lo <= hi")
        if not (0 < self.crop_size <= ROI_SIZE):
            raise InvalidArgumentError(f"crop_size must be in (0, {ROI_SIZE}]")
        if not (0.0 <= self.flip_prob <= 1.0):
            raise InvalidArgumentError("flip_prob must be in [0, 1]")


_BOOL_FIELDS = ("enable_scale", "enable_degrade", "enable_patches")
_FLOAT_PAIR_FIELDS = ("scale_range", "degrade_range", "patch_frac_range")


def parse_aug_config_text(text: str) -> dict:
    """Parse ``key = value`` lines mirroring the Aug2DConfig fields.

    Booleans are true/false, ranges are two numbers separated by whitespace
    or a comma.  Blank lines and ``#`` comments are ignored.  Returns a
    kwargs dict suitable for Aug2DConfig.
    """
    kwargs = {}
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgumentError(f"aug config line {i}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        parts = value.replace(",", " ").split()
        if key in _BOOL_FIELDS:
            if value.lower() not in ("true", "false"):
                raise InvalidArgumentError(f"aug config line {i}: {key} must be true or false")
            kwargs[key] = value.lower() == "true"
        elif key in _FLOAT_PAIR_FIELDS:
            if len(parts) != 2:
                raise InvalidArgumentError(f"aug config line {i}: {key} needs two numbers")
            kwargs[key] = (float(parts[0]), float(parts[1]))
        elif key == "patch_count_range":
            if len(parts) != 2:
                raise InvalidArgumentError(f"aug config line {i}: {key} needs two integers")
            kwargs[key] = (int(parts[0]), int(parts[1]))
        elif key in ("crop_size", "seed"):
            kwargs[key] = int(value)
        elif key == "flip_prob":
            kwargs[key] = float(value)
        else:
            raise InvalidArgumentError(f"aug config line {i}: unknown key {key!r}")
    return kwargs


def read_aug_config(path, **overrides) -> Aug2DConfig:
    """Build an Aug2DConfig from a key-value file, with keyword fallbacks."""
    kwargs = dict(overrides)
    kwargs.update(parse_aug_config_text(Path(path).read_text(encoding="utf-8")))
    return Aug2DConfig(**kwargs)


@dataclass(frozen=True)
class NoisePatch:
    x: int
    y: int
    width: int
    height: int
    noise: np.ndarray  # (height, width, 3) uint8


@dataclass(frozen=True)
class AugPlan:
    """One video's frozen augmentation draws."""

    flip: bool
    crop_x: int
    crop_y: int
    scale: float | None
    degrade: float | None
    patches: tuple = ()


def make_video_plan(config: Aug2DConfig, video_seed: int) -> AugPlan:
    """Draw one plan for a whole video; deterministic for a given seed."""
    rng = np.random.default_rng(video_seed)
    flip = bool(rng.random() < config.flip_prob)
    max_off = ROI_SIZE - config.crop_size
    crop_x = int(rng.integers(0, max_off + 1))
    crop_y = int(rng.integers(0, max_off + 1))
    scale = float(rng.uniform(*config.scale_range)) if config.enable_scale else None
    degrade = float(rng.uniform(*config.degrade_range)) if config.enable_degrade else None
    patches = []
    if config.enable_patches:
        lo, hi = config.patch_count_range
        count = int(rng.integers(lo, hi + 1))
        for _ in range(count):
            wf = rng.uniform(*config.patch_frac_range)
            hf = rng.uniform(*config.patch_frac_range)
            pw = int(np.floor(wf * ROI_SIZE + 0.5))
            ph = int(np.floor(hf * ROI_SIZE + 0.5))
            x = int(rng.integers(0, ROI_SIZE - pw + 1))
            y = int(rng.integers(0, ROI_SIZE - ph + 1))
            noise = rng.integers(0, 256, size=(ph, pw, 3), dtype=np.uint8)
            patches.append(NoisePatch(x=x, y=y, width=pw, height=ph, noise=noise))
    return AugPlan(flip=flip, crop_x=crop_x, crop_y=crop_y, scale=scale,
                   degrade=degrade, patches=tuple(patches))


def _recenter(img: np.ndarray, target: int) -> np.ndarray:
    """Center-crop or replicate-pad a square image back to the target side."""
    side = img.shape[0]
    if side == target:
        return img
    if side > target:
        start = (side - target) // 2
        return img[start:start + target, start:start + target]
    pad = target - side
    before = pad // 2
    after = pad - before
    return np.pad(img, ((before, after), (before, after), (0, 0)), mode="edge")


def apply_plan(frame: np.ndarray, plan: AugPlan, crop_size: int = CROP_SIZE) -> np.ndarray:
    """Run one frame through a plan: scale, degrade, patches, crop, flip."""
    img = validate_image(frame)
    if img.shape[:2] != (ROI_SIZE, ROI_SIZE):
        raise SizeError(f"expected {ROI_SIZE}x{ROI_SIZE} input, got {img.shape[1]}x{img.shape[0]}")
    if plan.scale is not None:
        side = int(np.floor(ROI_SIZE * plan.scale + 0.5))
        img = _recenter(resize_bilinear(img, side, side), ROI_SIZE)
    if plan.degrade is not None:
        side = int(np.floor(ROI_SIZE * plan.degrade + 0.5))
        img = resize_bilinear(resize_bilinear(img, side, side), ROI_SIZE, ROI_SIZE)
    if plan.patches:
        img = img.copy()
        for p in plan.patches:
            img[p.y:p.y + p.height, p.x:p.x + p.width] = p.noise
    img = img[plan.crop_y:plan.crop_y + crop_size, plan.crop_x:plan.crop_x + crop_size]
    if plan.flip:
        img = img[:, ::-1]
    return np.ascontiguousarray(img)
