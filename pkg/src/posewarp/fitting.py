"""Recover weak-perspective pose and shape coefficients from 2D landmarks.

Fitting alternates two exactly-solvable subproblems: a scaled-orthographic
pose estimate (affine least squares followed by projection onto the rotation
manifold) and a joint Tikhonov-regularized linear solve for identity and
expression coefficients.  An iterate is only accepted if it does not worsen
the reprojection RMSE, so the recorded RMSE trace is non-increasing and the
returned parameters are always the best seen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FitDegenerateError, InvalidArgumentError
from .morphable import (
    ORTHO_PROJECTION,
    FitParams,
    MorphableModel,
    N_LANDMARKS,
)

# Accept an iterate that is worse by no more than this (float jitter only).
MONOTONE_SLACK = 1e-9

_RANK_RTOL = 1e-10
_CROSS_TOL = 1e-8


@dataclass(frozen=True)
class FitConfig:
    """Alternation limits and Tikhonov weights.

    ``reg_id`` / ``reg_exp`` default to 1e-3 times the landmark count when
    left as None.
    """

    max_alternations: int = 10
    convergence_tol: float = 1e-4   # pixels of RMSE change
    reg_id: float | None = None
    reg_exp: float | None = None

    def __post_init__(self):
        if self.max_alternations < 1:
            raise InvalidArgumentError("max_alternations must be >= 1")
        if self.convergence_tol < 0:
            raise InvalidArgumentError("convergence_tol must be >= 0")
        for name in ("reg_id", "reg_exp"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise InvalidArgumentError(f"{name} must be >= 0")

    def resolved_regs(self, n_landmarks: int) -> tuple[float, float]:
        default = 1e-3 * n_landmarks
        return (
            default if self.reg_id is None else self.reg_id,
            default if self.reg_exp is None else self.reg_exp,
        )


@dataclass(frozen=True)
class FitResult:
    """Outcome of fitting one frame.

    ``params`` is None (and ``error`` set) when the frame's geometry was
    degenerate.  ``rmse_history`` records the reprojection RMSE of each
    accepted alternation, in order.
    """

    params: FitParams | None
    reprojection_rmse: float
    iterations_used: int
    converged: bool
    rmse_history: tuple = ()
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.params is None


def _validate_points(points: np.ndarray, rows: int, name: str) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] != rows:
        raise InvalidArgumentError(f"{name} must be {rows} x L, got {pts.shape}")
    if not np.isfinite(pts).all():
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return pts


def estimate_pose(landmark_shape_3d, landmarks_2d) -> tuple[float, np.ndarray, np.ndarray]:
    """Least-squares weak-perspective pose from 3D-2D correspondences.

    Solves the unconstrained 2x3 affine map plus translation, then factors
    it into f * C * R: the two affine rows are normalized, the third row is
    their cross product, and the stack is projected to the nearest rotation
    (orthogonal Procrustes).  f is the mean of the two row norms; the
    translation re-solves the centroid match under the final linear part.
    """
    X = _validate_points(landmark_shape_3d, 3, "landmark_shape_3d")
    Y = _validate_points(landmarks_2d, 2, "landmarks_2d")
    if X.shape[1] != Y.shape[1]:
        raise InvalidArgumentError("point counts differ between 3D and 2D sets")
    if X.shape[1] < 3:
        raise InvalidArgumentError("need at least 3 correspondences")

    x_mean = X.mean(axis=1, keepdims=True)
    y_mean = Y.mean(axis=1, keepdims=True)
    Xc = X - x_mean
    Yc = Y - y_mean

    sv = np.linalg.svd(Xc, compute_uv=False)
    if sv[-1] <= _RANK_RTOL * sv[0]:
        raise FitDegenerateError("rank-deficient normal equations: 3D landmarks are coplanar or collinear")
    A = (Yc @ Xc.T) @ np.linalg.inv(Xc @ Xc.T)

    n1 = np.linalg.norm(A[0])
    n2 = np.linalg.norm(A[1])
    extent = max(np.abs(Yc).max(), 1.0)
    if n1 <= 1e-12 * extent or n2 <= 1e-12 * extent:
        raise FitDegenerateError("degenerate 2D landmarks: affine rows vanish")
    r1 = A[0] / n1
    r2 = A[1] / n2
    r3 = np.cross(r1, r2)
    if np.linalg.norm(r3) < _CROSS_TOL:
        raise FitDegenerateError("degenerate 2D landmarks: collinear projection")

    U, _, Vt = np.linalg.svd(np.stack([r1, r2, r3]))
    R = U @ Vt
    if np.linalg.det(R) < 0:
        R = U @ np.diag([1.0, 1.0, -1.0]) @ Vt

    f = 0.5 * (n1 + n2)
    t = (y_mean - f * (ORTHO_PROJECTION @ R) @ x_mean).ravel()
    return float(f), R, t


def _landmark_arrays(model: MorphableModel) -> tuple[np.ndarray, np.ndarray]:
    rows = model.landmark_rows()
    mean_lm = model.mean_shape.astype(np.float64)[rows]
    basis_lm = np.hstack([model.id_basis, model.exp_basis]).astype(np.float64)[rows]
    return mean_lm, basis_lm


def _reg_diagonal(model: MorphableModel, reg_id: float, reg_exp: float) -> np.ndarray:
    k_id, k_exp = model.k_id, model.k_exp
    weights = np.concatenate([np.full(k_id, reg_id), np.full(k_exp, reg_exp)])
    if model.basis_scales is not None:
        weights = weights / model.basis_scales.astype(np.float64) ** 2
    return weights


def estimate_coefficients(model: MorphableModel, pose, landmarks_2d, config: FitConfig | None = None):
    """Joint regularized solve for identity and expression coefficients.

    Minimizes the squared landmark reprojection error plus
    reg_id * ||p_id/s_id||^2 + reg_exp * ||p_exp/s_exp||^2 in one linear
    system; s_* come from the model's basis_scales (all ones if absent).
    """
    cfg = config or FitConfig()
    f, R, t = pose
    Y = _validate_points(landmarks_2d, 2, "landmarks_2d")
    L = Y.shape[1]
    mean_lm, basis_lm = _landmark_arrays(model)
    if Y.shape[1] != N_LANDMARKS:
        raise InvalidArgumentError(f"landmarks_2d must have {N_LANDMARKS} columns")

    P = f * (ORTHO_PROJECTION @ np.asarray(R, dtype=np.float64))  # 2x3
    k = model.k_id + model.k_exp
    # Per-landmark 3xK blocks projected to 2xK, stacked to (2L, K).
    G = np.einsum("ij,ljk->lik", P, basis_lm.reshape(L, 3, k)).reshape(2 * L, k)
    resid = Y - (P @ mean_lm.reshape(L, 3).T + np.asarray(t, dtype=np.float64)[:, None])
    b = resid.T.ravel()

    reg_id, reg_exp = cfg.resolved_regs(L)
    H = G.T @ G + np.diag(_reg_diagonal(model, reg_id, reg_exp))
    try:
        coeffs = np.linalg.solve(H, G.T @ b)
    except np.linalg.LinAlgError as exc:
        raise FitDegenerateError(f"singular coefficient system: {exc}") from exc
    return coeffs[: model.k_id], coeffs[model.k_id:]


def reprojection_rmse(model: MorphableModel, params: FitParams, landmarks_2d) -> float:
    """Root-mean-square pixel distance between projected landmarks and targets."""
    Y = _validate_points(landmarks_2d, 2, "landmarks_2d")
    mean_lm, basis_lm = _landmark_arrays(model)
    coeffs = np.concatenate([params.id_coeffs, params.exp_coeffs])
    shape = (mean_lm + basis_lm @ coeffs).reshape(-1, 3).T
    proj = params.scale * (ORTHO_PROJECTION @ params.rotation) @ shape + params.translation[:, None]
    return float(np.sqrt(np.mean(np.sum((proj - Y) ** 2, axis=0))))


def fit_frame(model: MorphableModel, landmarks_2d, config: FitConfig | None = None,
              init_params: FitParams | None = None) -> FitResult:
    """Alternate pose and coefficient estimation on one frame's landmarks.

    Stops when the RMSE change drops below the convergence tolerance, when
    the alternation budget runs out, or when a candidate iterate would worsen
    the RMSE (the candidate is then discarded).  Deterministic for fixed
    inputs.
    """
    cfg = config or FitConfig()
    Y = _validate_points(landmarks_2d, 2, "landmarks_2d")
    if Y.shape[1] != N_LANDMARKS:
        raise InvalidArgumentError(f"landmarks_2d must be 2 x {N_LANDMARKS}")
    mean_lm, basis_lm = _landmark_arrays(model)

    if init_params is not None:
        coeffs = np.concatenate([init_params.id_coeffs, init_params.exp_coeffs])
        best_params = init_params
        best_rmse = reprojection_rmse(model, init_params, Y)
        prev_rmse = best_rmse
    else:
        coeffs = np.zeros(model.k_id + model.k_exp)
        best_params = None
        best_rmse = math.inf
        prev_rmse = math.inf

    history = []
    converged = False
    iterations = 0
    for it in range(1, cfg.max_alternations + 1):
        iterations = it
        shape_lm = (mean_lm + basis_lm @ coeffs).reshape(-1, 3).T
        f, R, t = estimate_pose(shape_lm, Y)
        id_c, exp_c = estimate_coefficients(model, (f, R, t), Y, cfg)
        coeffs = np.concatenate([id_c, exp_c])
        params = FitParams(scale=f, rotation=R, translation=t, id_coeffs=id_c, exp_coeffs=exp_c)
        rmse = reprojection_rmse(model, params, Y)
        if rmse > prev_rmse + MONOTONE_SLACK:
            break  # repeating from a rejected iterate cannot improve
        history.append(rmse)
        if rmse < best_rmse:
            best_params, best_rmse = params, rmse
        if abs(prev_rmse - rmse) < cfg.convergence_tol:
            converged = True
            break
        prev_rmse = rmse

    if best_params is None:
        raise FitDegenerateError("no acceptable iterate produced")
    return FitResult(
        params=best_params,
        reprojection_rmse=best_rmse,
        iterations_used=iterations,
        converged=converged,
        rmse_history=tuple(history),
    )


def fit_sequence(model: MorphableModel, frames, config: FitConfig | None = None) -> list[FitResult]:
    """Fit every frame of a video, warm-starting each frame from its predecessor.

    A degenerate frame is recorded as a failed FitResult and its successor
    falls back to a cold start; the output always has one entry per frame.
    """
    frames = list(frames)
    if not frames:
        raise InvalidArgumentError("frame list is empty")
    results: list[FitResult] = []
    init: FitParams | None = None
    for lm in frames:
        try:
            res = fit_frame(model, lm, config, init_params=init)
            init = res.params
        except FitDegenerateError as exc:
            res = FitResult(
                params=None,
                reprojection_rmse=math.inf,
                iterations_used=0,
                converged=False,
                error=str(exc),
            )
            init = None
        results.append(res)
    return results
