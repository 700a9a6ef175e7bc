"""Pose augmentation toolkit for visual speech data.

Fits a linear 3D morphable model to facial landmark sequences, re-renders
videos at new yaw/pitch angles to build a large-pose dataset, applies
video-level 2D augmentations and word segmentation rules, and reports
pose-binned accuracy tables.
"""

from .errors import (
    AlignmentDegenerateError,
    DegeneratePoseError,
    FitDegenerateError,
    InvalidArgumentError,
    ManifestError,
    ModelFormatError,
    NoBackgroundError,
    PosewarpError,
    RenderError,
    SizeError,
    TriangulationError,
    VideoSkipped,
)
from .evaluate import (
    EvalReport,
    PoseBinTable,
    PredictionRecord,
    evaluate,
    pose_bin,
    sequence_pose,
)
from .fitting import (
    FitConfig,
    FitResult,
    estimate_coefficients,
    estimate_pose,
    fit_frame,
    fit_sequence,
    reprojection_rmse,
)
from .lp import PoseIncrement, augment_video, build_lp, sample_pose_increment
from .manifest import ManifestEntry, read_manifest, write_manifest
from .model_io import load_model, save_model
from .morphable import (
    FitParams,
    MorphableModel,
    PoseAngles,
    euler_from_rotation,
    pose_to_camera,
    project,
    reconstruct_landmarks,
    reconstruct_shape,
    rotation_from_euler,
)
from .preprocess import (
    Aug2DConfig,
    AugPlan,
    AlignmentReference,
    align_face,
    apply_plan,
    crop_mouth,
    default_reference,
    make_video_plan,
)
from .render import (
    SceneMesh,
    build_scene_mesh,
    estimate_background_depth,
    rasterize,
    render_new_pose,
    rotate_scene,
)
from .segment import (
    Reason,
    SegmentDecision,
    SplitResult,
    WordBoundary,
    balance_split,
    decide_segment,
    extract_window,
)

__version__ = "0.1.0"
