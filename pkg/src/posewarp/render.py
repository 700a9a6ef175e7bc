"""Re-render a fitted face and its background at a new pose.

The whole image is lifted to a textured 3D mesh: the posed face mesh plus a
grid of background anchor points placed on a constant-depth plane at the
face's farthest depth.  The combined point set is Delaunay-triangulated in
2D (interior anchors are removed first, so the face hull is triangulated
purely among face vertices), rotated about the face centroid, and z-buffered
back into an image with the source frame as texture.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, Delaunay, QhullError

from .errors import (
    InvalidArgumentError,
    NoBackgroundError,
    RenderError,
    TriangulationError,
)
from .imageops import sample_bilinear, to_u8, validate_image
from .morphable import (
    FitParams,
    MorphableModel,
    PoseAngles,
    pose_to_camera,
    reconstruct_shape,
    rotation_from_euler,
)

DEFAULT_GRID_STEP = 16

_HULL_EPS = 1e-9


@dataclass(frozen=True)
class SceneMesh:
    """Camera-space scene geometry with source-image texture coordinates."""

    vertices: np.ndarray          # (3, M): x/y pixels, z depth (toward camera)
    uv: np.ndarray                # (2, M): source-image positions
    triangles: np.ndarray         # (T, 3) vertex indices
    face_vertex_mask: np.ndarray  # (M,) bool, True for face vertices

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=np.float64))
        object.__setattr__(self, "uv", np.asarray(self.uv, dtype=np.float64))
        object.__setattr__(self, "triangles", np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3))
        object.__setattr__(self, "face_vertex_mask", np.asarray(self.face_vertex_mask, dtype=bool))
        m = self.vertices.shape[1]
        if self.uv.shape != (2, m) or self.face_vertex_mask.shape != (m,):
            raise InvalidArgumentError("SceneMesh field shapes are inconsistent")
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= m):
            raise InvalidArgumentError("SceneMesh triangle index out of range")


def _face_hull_interior(face_xy: np.ndarray):
    """Return a predicate marking points inside (or on) the face's 2D hull."""
    try:
        hull = ConvexHull(face_xy.T)
    except QhullError:
        return lambda pts: np.zeros(len(pts), dtype=bool)  # degenerate hull: zero area
    eqs = hull.equations  # rows: [a, b, offset] with a*x + b*y + offset <= 0 inside

    def inside(pts: np.ndarray) -> np.ndarray:
        vals = pts @ eqs[:, :2].T + eqs[:, 2]
        return (vals <= _HULL_EPS).all(axis=1)

    return inside


def estimate_background_depth(face_mesh: np.ndarray, image: np.ndarray,
                              grid_step: int = DEFAULT_GRID_STEP) -> np.ndarray:
    """Background anchors (3 x A) on a constant plane at the face's far depth.

    Anchors sit on a regular grid over [0, w] x [0, h] (plus the four image
    corners) with points inside the face's 2D convex hull removed; every
    anchor's z equals the farthest-from-camera face vertex depth.
    """
    face = np.asarray(face_mesh, dtype=np.float64)
    if face.ndim != 2 or face.shape[0] != 3 or face.shape[1] == 0:
        raise InvalidArgumentError("face_mesh must be a non-empty 3 x V array")
    img = validate_image(image)
    if grid_step < 1:
        raise InvalidArgumentError("grid_step must be >= 1")
    h, w = img.shape[:2]

    xs = np.arange(0, w + 1, grid_step, dtype=np.float64)
    ys = np.arange(0, h + 1, grid_step, dtype=np.float64)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    corners = np.array([[0.0, 0.0], [w, 0.0], [0.0, h], [w, h]])
    pts = np.unique(np.vstack([pts, corners]), axis=0)

    inside = _face_hull_interior(face[:2])
    pts = pts[~inside(pts)]
    if len(pts) == 0:
        raise NoBackgroundError("face hull covers the entire image")

    # Canonical row-major order so downstream output is order-independent.
    order = np.lexsort((pts[:, 0], pts[:, 1]))
    pts = pts[order]
    z_far = face[2].min()
    return np.vstack([pts.T, np.full(len(pts), z_far)])


def build_scene_mesh(face_mesh: np.ndarray, fit: FitParams, image: np.ndarray,
                     anchors: np.ndarray) -> SceneMesh:
    """Triangulate the posed face vertices plus background anchors.

    ``face_mesh`` is the reconstructed model-space shape; it is posed into
    camera space with ``fit``.  Texture coordinates of every vertex are its
    current 2D position (clamped to the image rectangle).
    """
    img = validate_image(image)
    anchors = np.asarray(anchors, dtype=np.float64)
    if anchors.ndim != 2 or anchors.shape[0] != 3 or anchors.shape[1] == 0:
        raise InvalidArgumentError("anchors must be a non-empty 3 x A array")
    h, w = img.shape[:2]

    if face_mesh is None:
        cam = np.zeros((3, 0))
    else:
        cam = pose_to_camera(np.asarray(face_mesh, dtype=np.float64), fit)
    vertices = np.hstack([cam, anchors])
    n_face = cam.shape[1]
    mask = np.zeros(vertices.shape[1], dtype=bool)
    mask[:n_face] = True

    xy = vertices[:2].T
    uniq, counts = np.unique(xy, axis=0, return_counts=True)
    if (counts > 1).any():
        dups = uniq[counts > 1]
        raise TriangulationError(f"duplicate 2D points: {dups[:5].tolist()}")
    try:
        tri = Delaunay(xy)
    except QhullError as exc:
        raise TriangulationError(f"triangulation failed: {exc}") from exc

    uv = np.vstack([np.clip(vertices[0], 0.0, w), np.clip(vertices[1], 0.0, h)])
    return SceneMesh(
        vertices=vertices,
        uv=uv,
        triangles=tri.simplices.astype(np.int64),
        face_vertex_mask=mask,
    )


def rotate_scene(mesh: SceneMesh, delta_yaw: float, delta_pitch: float,
                 pivot: np.ndarray | None = None) -> SceneMesh:
    """Rotate scene vertices about a pivot; texture coordinates stay fixed.

    The pivot defaults to the face-vertex centroid (all-vertex centroid when
    the mesh has no face vertices).  A zero increment returns the vertices
    bit-identical.
    """
    if delta_yaw == 0.0 and delta_pitch == 0.0:
        return mesh
    if pivot is None:
        ref = mesh.vertices[:, mesh.face_vertex_mask] if mesh.face_vertex_mask.any() else mesh.vertices
        pivot = ref.mean(axis=1)
    pivot = np.asarray(pivot, dtype=np.float64).reshape(3, 1)
    R = rotation_from_euler(PoseAngles(yaw=delta_yaw, pitch=delta_pitch, roll=0.0))
    rotated = R @ (mesh.vertices - pivot) + pivot
    return SceneMesh(
        vertices=rotated,
        uv=mesh.uv,
        triangles=mesh.triangles,
        face_vertex_mask=mesh.face_vertex_mask,
    )


def _fill_uncovered_rows(out: np.ndarray, covered: np.ndarray) -> np.ndarray:
    """Replicate the nearest covered pixel along each row (ties go left)."""
    h, w = covered.shape
    cols = np.arange(w)
    left = np.where(covered, cols, -1)
    left = np.maximum.accumulate(left, axis=1)
    right = np.where(covered, cols, w)
    right = np.minimum.accumulate(right[:, ::-1], axis=1)[:, ::-1]

    dist_left = np.where(left >= 0, cols - left, np.iinfo(np.int64).max)
    dist_right = np.where(right < w, right - cols, np.iinfo(np.int64).max)
    use_left = dist_left <= dist_right
    src = np.where(use_left, np.clip(left, 0, w - 1), np.clip(right, 0, w - 1))

    # Rows with no coverage point src at zero-initialized pixels, staying black.
    rows = np.arange(h)[:, None]
    filled = out[rows, src]
    return np.where(covered[..., None], out, filled)


def rasterize(mesh: SceneMesh, source: np.ndarray, out_size: tuple[int, int]) -> np.ndarray:
    """Z-buffered rasterization of the scene mesh textured by the source image.

    Output pixels are sampled at their centers (x + 0.5, y + 0.5); the
    nearest-to-camera fragment wins (exact depth ties resolve to the triangle
    with the smaller vertex-index triple, independent of submission order).
    Pixels not covered by any triangle are filled by replicating the nearest
    covered pixel in their row.
    """
    img = validate_image(source)
    out_w, out_h = out_size
    if out_w < 1 or out_h < 1:
        raise InvalidArgumentError("output size must be positive")
    if mesh.triangles.shape[0] == 0:
        raise RenderError("empty scene mesh")

    verts = mesh.vertices
    n_verts = verts.shape[1]
    zbuf = np.full((out_h, out_w), -np.inf)
    keybuf = np.full((out_h, out_w), np.iinfo(np.int64).max, dtype=np.int64)
    ubuf = np.zeros((out_h, out_w))
    vbuf = np.zeros((out_h, out_w))

    tris = mesh.triangles
    keys = (tris[:, 0] * n_verts + tris[:, 1]) * n_verts + tris[:, 2]

    for tri, key in zip(tris, keys):
        px = verts[0, tri]
        py = verts[1, tri]
        pz = verts[2, tri]
        x0 = max(int(np.ceil(px.min() - 0.5)), 0)
        x1 = min(int(np.floor(px.max() - 0.5)), out_w - 1)
        y0 = max(int(np.ceil(py.min() - 0.5)), 0)
        y1 = min(int(np.floor(py.max() - 0.5)), out_h - 1)
        if x1 < x0 or y1 < y0:
            continue
        denom = (px[1] - px[0]) * (py[2] - py[0]) - (px[2] - px[0]) * (py[1] - py[0])
        if abs(denom) < 1e-12:
            continue  # degenerate sliver
        cx = np.arange(x0, x1 + 1) + 0.5
        cy = np.arange(y0, y1 + 1) + 0.5
        gx, gy = np.meshgrid(cx, cy)
        b1 = ((gx - px[0]) * (py[2] - py[0]) - (px[2] - px[0]) * (gy - py[0])) / denom
        b2 = ((px[1] - px[0]) * (gy - py[0]) - (gx - px[0]) * (py[1] - py[0])) / denom
        b0 = 1.0 - b1 - b2
        inside = (b0 >= 0.0) & (b1 >= 0.0) & (b2 >= 0.0)
        if not inside.any():
            continue
        z = b0 * pz[0] + b1 * pz[1] + b2 * pz[2]
        win = zbuf[y0:y1 + 1, x0:x1 + 1]
        kwin = keybuf[y0:y1 + 1, x0:x1 + 1]
        better = inside & ((z > win) | ((z == win) & (key < kwin)))
        if not better.any():
            continue
        u = b0 * mesh.uv[0, tri[0]] + b1 * mesh.uv[0, tri[1]] + b2 * mesh.uv[0, tri[2]]
        v = b0 * mesh.uv[1, tri[0]] + b1 * mesh.uv[1, tri[1]] + b2 * mesh.uv[1, tri[2]]
        win[better] = z[better]
        kwin[better] = key
        ubuf[y0:y1 + 1, x0:x1 + 1][better] = u[better]
        vbuf[y0:y1 + 1, x0:x1 + 1][better] = v[better]

    covered = np.isfinite(zbuf)
    out = np.zeros((out_h, out_w, 3), dtype=np.uint8)
    if covered.any():
        samples = sample_bilinear(img, ubuf[covered] - 0.5, vbuf[covered] - 0.5)
        out[covered] = to_u8(samples)
    return _fill_uncovered_rows(out, covered)


def render_new_pose(image: np.ndarray, landmarks, model: MorphableModel, fit,
                    delta: tuple[float, float], grid_step: int = DEFAULT_GRID_STEP) -> np.ndarray:
    """Full pipeline: lift image to a scene mesh, rotate, rasterize.

    ``fit`` is a FitResult from fitting this frame; it must have converged.
    ``landmarks`` (2 x 68) are validated for pipeline symmetry but the
    constant-depth background model does not otherwise use them.
    """
    img = validate_image(image)
    if fit.params is None or not fit.converged:
        raise InvalidArgumentError("render_new_pose requires a converged fit")
    if landmarks is not None:
        lm = np.asarray(landmarks, dtype=np.float64)
        if lm.ndim != 2 or lm.shape[0] != 2 or not np.isfinite(lm).all():
            raise InvalidArgumentError("landmarks must be finite and 2 x L")
    params = fit.params
    shape = reconstruct_shape(model, params.id_coeffs, params.exp_coeffs)
    cam = pose_to_camera(shape, params)
    anchors = estimate_background_depth(cam, img, grid_step)
    mesh = build_scene_mesh(shape, params, img, anchors)
    rotated = rotate_scene(mesh, delta[0], delta[1])
    h, w = img.shape[:2]
    return rasterize(rotated, img, (w, h))
