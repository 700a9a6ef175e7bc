"""Linear morphable face model: reconstruction, projection, rotation utilities.

Conventions used throughout the toolkit:

- Shape vectors are length ``3N`` with interleaved per-vertex coordinates
  ``[x0, y0, z0, x1, y1, z1, ...]``; reshaping to ``3 x N`` puts vertex ``i``
  in column ``i``.
- Image coordinates are x-right, y-down, with z pointing toward the camera
  (larger z = closer).
- Euler angles are intrinsic yaw(y) - pitch(x) - roll(z), in degrees:
  ``R = R_y(yaw) @ R_x(pitch) @ R_z(roll)``. Positive yaw turns the subject
  left in the image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePoseError, InvalidArgumentError

# Orthographic projection: drop the z row.
ORTHO_PROJECTION = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])

N_LANDMARKS = 68

ROTATION_TOL = 1e-6
GIMBAL_LIMIT_DEG = 89.9


def _as_f32(name: str, value, shape: tuple) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float32)
    if arr.shape != shape:
        raise InvalidArgumentError(f"{name}: expected shape {shape}, got {arr.shape}")
    return arr


@dataclass(frozen=True)
class MorphableModel:
    """Mean shape plus identity/expression bases, landmark indices, and topology.

    Array fields are held as float32 / int32 so that the binary container
    round-trips bit-exactly.  ``basis_scales``, when present, carries one
    positive weight per basis column (identity columns first, then
    expression) and is used to weight coefficient regularization.
    """

    n_vertices: int
    mean_shape: np.ndarray          # (3N,)
    id_basis: np.ndarray            # (3N, K_id)
    exp_basis: np.ndarray           # (3N, K_exp)
    landmark_indices: np.ndarray    # (68,)
    triangles: np.ndarray           # (T, 3)
    basis_scales: np.ndarray | None = None  # (K_id + K_exp,)

    def __post_init__(self):
        n = int(self.n_vertices)
        if n < 1:
            raise InvalidArgumentError("n_vertices must be >= 1")
        object.__setattr__(self, "n_vertices", n)
        object.__setattr__(self, "mean_shape", _as_f32("mean_shape", self.mean_shape, (3 * n,)))
        id_b = np.asarray(self.id_basis, dtype=np.float32)
        exp_b = np.asarray(self.exp_basis, dtype=np.float32)
        if id_b.ndim != 2 or id_b.shape[0] != 3 * n:
            raise InvalidArgumentError(f"id_basis: expected shape (3N, K_id) = ({3*n}, *), got {id_b.shape}")
        if exp_b.ndim != 2 or exp_b.shape[0] != 3 * n:
            raise InvalidArgumentError(f"exp_basis: expected shape (3N, K_exp) = ({3*n}, *), got {exp_b.shape}")
        object.__setattr__(self, "id_basis", id_b)
        object.__setattr__(self, "exp_basis", exp_b)

        lm = np.asarray(self.landmark_indices, dtype=np.int32)
        if lm.shape != (N_LANDMARKS,):
            raise InvalidArgumentError(f"landmark_indices: expected {N_LANDMARKS} entries, got shape {lm.shape}")
        if lm.min(initial=0) < 0 or (lm >= n).any():
            raise InvalidArgumentError("landmark_indices: index out of range")
        object.__setattr__(self, "landmark_indices", lm)

        tri = np.asarray(self.triangles, dtype=np.int32).reshape(-1, 3)
        if tri.size and (tri.min() < 0 or tri.max() >= n):
            raise InvalidArgumentError("triangles: vertex index out of range")
        object.__setattr__(self, "triangles", tri)

        if self.basis_scales is not None:
            k = self.k_id + self.k_exp
            sc = _as_f32("basis_scales", self.basis_scales, (k,))
            if (sc <= 0).any():
                raise InvalidArgumentError("basis_scales must be positive")
            object.__setattr__(self, "basis_scales", sc)

    @property
    def k_id(self) -> int:
        return self.id_basis.shape[1]

    @property
    def k_exp(self) -> int:
        return self.exp_basis.shape[1]

    def landmark_rows(self) -> np.ndarray:
        """Row indices of the landmark vertices' x/y/z entries in a 3N vector."""
        v = self.landmark_indices.astype(np.int64)
        return np.stack([3 * v, 3 * v + 1, 3 * v + 2], axis=1).ravel()


@dataclass(frozen=True)
class FitParams:
    """Weak-perspective pose plus shape coefficients for one frame."""

    scale: float
    rotation: np.ndarray        # (3, 3)
    translation: np.ndarray     # (2,)
    id_coeffs: np.ndarray       # (K_id,)
    exp_coeffs: np.ndarray      # (K_exp,)

    def __post_init__(self):
        if not self.scale > 0:
            raise InvalidArgumentError(f"scale must be positive, got {self.scale}")
        R = np.asarray(self.rotation, dtype=np.float64)
        check_rotation(R)
        object.__setattr__(self, "rotation", R)
        t = np.asarray(self.translation, dtype=np.float64).reshape(2)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "id_coeffs", np.asarray(self.id_coeffs, dtype=np.float64).ravel())
        object.__setattr__(self, "exp_coeffs", np.asarray(self.exp_coeffs, dtype=np.float64).ravel())


@dataclass(frozen=True)
class PoseAngles:
    """Head pose in degrees."""

    yaw: float
    pitch: float
    roll: float = 0.0

    def __post_init__(self):
        if not (-180.0 <= self.yaw <= 180.0):
            raise InvalidArgumentError(f"yaw out of [-180, 180]: {self.yaw}")
        if not (-90.0 <= self.pitch <= 90.0):
            raise InvalidArgumentError(f"pitch out of [-90, 90]: {self.pitch}")
        if not (-180.0 <= self.roll <= 180.0):
            raise InvalidArgumentError(f"roll out of [-180, 180]: {self.roll}")


def check_rotation(R: np.ndarray, tol: float = ROTATION_TOL) -> None:
    """Raise unless R is orthonormal with determinant +1 (within tol)."""
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise InvalidArgumentError(f"rotation must be 3x3, got {R.shape}")
    if not np.allclose(R.T @ R, np.eye(3), atol=tol):
        raise InvalidArgumentError("rotation is not orthonormal")
    if abs(np.linalg.det(R) - 1.0) > tol:
        raise InvalidArgumentError("rotation determinant is not +1")


def reconstruct_shape(model: MorphableModel, id_coeffs, exp_coeffs) -> np.ndarray:
    """Mean shape plus basis displacements, as 3 x N coordinates."""
    p_id = np.asarray(id_coeffs, dtype=np.float64).ravel()
    p_exp = np.asarray(exp_coeffs, dtype=np.float64).ravel()
    if p_id.shape[0] != model.k_id:
        raise InvalidArgumentError(f"id_coeffs length {p_id.shape[0]} != K_id {model.k_id}")
    if p_exp.shape[0] != model.k_exp:
        raise InvalidArgumentError(f"exp_coeffs length {p_exp.shape[0]} != K_exp {model.k_exp}")
    vec = (model.mean_shape.astype(np.float64)
           + model.id_basis.astype(np.float64) @ p_id
           + model.exp_basis.astype(np.float64) @ p_exp)
    return vec.reshape(-1, 3).T


def reconstruct_landmarks(model: MorphableModel, id_coeffs, exp_coeffs) -> np.ndarray:
    """Reconstructed positions of the 68 landmark vertices, 3 x 68."""
    return reconstruct_shape(model, id_coeffs, exp_coeffs)[:, model.landmark_indices]


def project(shape: np.ndarray, params: FitParams) -> np.ndarray:
    """Weak-perspective projection f * C * R * shape + t, as 2 x N pixels."""
    shape = np.asarray(shape, dtype=np.float64)
    if shape.ndim != 2 or shape.shape[0] != 3:
        raise InvalidArgumentError(f"shape must be 3 x N, got {shape.shape}")
    check_rotation(params.rotation)
    return params.scale * (ORTHO_PROJECTION @ params.rotation) @ shape + params.translation[:, None]


def pose_to_camera(shape: np.ndarray, params: FitParams) -> np.ndarray:
    """Lift a model-space shape into camera space: f*R*shape with x/y shifted by t.

    The x/y rows equal the weak-perspective projection; z keeps the scaled
    depth so the mesh can be re-rotated and z-buffered.
    """
    shape = np.asarray(shape, dtype=np.float64)
    if shape.ndim != 2 or shape.shape[0] != 3:
        raise InvalidArgumentError(f"shape must be 3 x N, got {shape.shape}")
    cam = params.scale * (params.rotation @ shape)
    cam[:2] += params.translation[:, None]
    return cam


def rotation_from_euler(angles: PoseAngles) -> np.ndarray:
    """Rotation matrix for intrinsic yaw(y)-pitch(x)-roll(z) angles in degrees."""
    y, p, r = np.radians([angles.yaw, angles.pitch, angles.roll])
    cy, sy = np.cos(y), np.sin(y)
    cp, sp = np.cos(p), np.sin(p)
    cr, sr = np.cos(r), np.sin(r)
    ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
    rz = np.array([[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]])
    return ry @ rx @ rz


def euler_from_rotation(rotation: np.ndarray) -> PoseAngles:
    """Decompose a rotation into yaw/pitch/roll degrees (yaw-pitch-roll order).

    For R = R_y(a) R_x(b) R_z(c):
        R[1,2] = -sin(b),  R[0,2] = sin(a)cos(b),  R[2,2] = cos(a)cos(b),
        R[1,0] = cos(b)sin(c),  R[1,1] = cos(b)cos(c).
    Raises DegeneratePoseError inside the gimbal neighbourhood |pitch| >= 89.9 deg.
    """
    R = np.asarray(rotation, dtype=np.float64)
    check_rotation(R)
    sp = -R[1, 2]
    if abs(sp) >= np.sin(np.radians(GIMBAL_LIMIT_DEG)):
        raise DegeneratePoseError(f"|pitch| >= {GIMBAL_LIMIT_DEG} deg: yaw/roll not separable")
    pitch = np.degrees(np.arcsin(np.clip(sp, -1.0, 1.0)))
    yaw = np.degrees(np.arctan2(R[0, 2], R[2, 2]))
    roll = np.degrees(np.arctan2(R[1, 0], R[1, 1]))
    return PoseAngles(yaw=float(yaw), pitch=float(pitch), roll=float(roll))
