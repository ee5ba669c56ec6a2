"""Fit pose and shape coefficients to observed 2D landmarks.

The reprojection objective is minimized by alternating two exact sub-solves:

* pose: scaled-orthographic alignment. The 2D targets are lifted to 3D with
  the current depth estimate (zero on a cold start), solved by the
  orthogonal-Procrustes/scale closed form, and the depths are re-lifted until
  the image-plane residual stops improving. Each lift round is a
  majorize-minimize step, so the 2D residual never increases.
* coefficients: ridge-regularized linear least squares via normal equations.
  The ridge weights are divided by the per-component basis scales and
  multiplied by scale**2 so the regularized solution is invariant to image
  resolution (scaling the observed landmarks rescales both terms equally).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .basis import Coefficients, Landmarks3D, ShapeBasis, reconstruct_shape
from .errors import DegenerateGeometryError, DimensionMismatchError, SchemaError, SolverError
from .projection import Landmarks2D, Pose, project

_LIFT_COLD_ITERS = 60
_LIFT_WARM_ITERS = 8
_LIFT_RTOL = 1e-5
_GN_MAX_ITERS = 25
_GN_RTOL = 1e-15
_DEGENERACY_RTOL = 1e-12


@dataclass(frozen=True)
class FitOptions:
    max_iters: int = 20
    tol: float = 1e-6
    lambda_id: float = 1e-3
    lambda_exp: float = 1e-3

    def __post_init__(self):
        if self.max_iters < 1:
            raise SchemaError("max_iters must be at least 1")
        if not (np.isfinite(self.tol) and self.tol > 0):
            raise SchemaError("tol must be positive and finite")
        for name, lam in (("lambda_id", self.lambda_id), ("lambda_exp", self.lambda_exp)):
            if not (np.isfinite(lam) and lam >= 0):
                raise SchemaError(f"{name} must be nonnegative and finite")


@dataclass(frozen=True)
class FitResult:
    pose: Pose
    coeffs: Coefficients
    residual_rms: float
    iterations: int
    converged: bool


def residual_rms(observed: Landmarks2D, pose: Pose, shape: Landmarks3D) -> float:
    """Root-mean-square per-coordinate reprojection error in pixels."""
    diff = observed.points - project(pose, shape).points
    return float(np.sqrt(np.mean(diff**2)))


def _check_pair(observed: Landmarks2D, shape: Landmarks3D) -> None:
    if observed.landmark_count != shape.landmark_count:
        raise DimensionMismatchError(
            f"observed has {observed.landmark_count} landmarks, shape has {shape.landmark_count}"
        )
    if observed.landmark_count < 3:
        raise DegenerateGeometryError("pose estimation needs at least 3 landmarks")


def _rotation_from_vector(vec: np.ndarray) -> np.ndarray:
    """Rodrigues formula: rotation matrix for a rotation vector."""
    angle = np.linalg.norm(vec)
    if angle < 1e-300:
        return np.eye(3)
    axis = vec / angle
    k = np.array(
        [[0.0, -axis[2], axis[1]], [axis[2], 0.0, -axis[0]], [-axis[1], axis[0], 0.0]]
    )
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def _image_error(b: np.ndarray, a: np.ndarray, scale: float, rotation: np.ndarray) -> float:
    return float(np.sum((b - scale * (a @ rotation.T)[:, :2]) ** 2))


def _det3(m: np.ndarray) -> float:
    return float(
        m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
        - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
        + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0])
    )


def _lift_rounds(b, a, z, a_energy, max_iters, atol):
    """Alternate Procrustes solves against depth-lifted targets.

    Each round re-solves rotation and scale against targets (b, z) and then
    re-lifts z from the new pose, which never increases the image-plane
    residual. Returns (scale, rotation, error).
    """
    lifted = np.empty((len(a), 3))
    lifted[:, :2] = b
    prev_err = np.inf
    scale, rotation, err = 1.0, np.eye(3), np.inf
    for _ in range(max_iters):
        lifted[:, 2] = z
        cross = a.T @ lifted
        u, s, vt = np.linalg.svd(cross)
        if s[0] <= 0.0 or s[1] <= _DEGENERACY_RTOL * s[0]:
            raise DegenerateGeometryError(
                "rank-deficient cross-covariance: landmarks are collinear or coincident"
            )
        d = 1.0 if _det3(vt.T @ u.T) > 0 else -1.0
        rotation = (vt.T * (1.0, 1.0, d)) @ u.T
        scale = (s[0] + s[1] + d * s[2]) / a_energy
        if not (np.isfinite(scale) and scale > 0):
            raise DegenerateGeometryError(f"non-positive recovered scale ({scale})")
        rotated = a @ rotation.T
        diff = (b - scale * rotated[:, :2]).ravel()
        err = float(diff @ diff)
        z = scale * rotated[:, 2]
        if abs(prev_err - err) <= _LIFT_RTOL * err + atol:
            break
        prev_err = err
    return scale, rotation, err


def _polish_pose(b, a, scale, rotation, err, atol):
    """Gauss-Newton on (rotation vector, log scale) for the image-plane objective.

    Quadratic convergence near the optimum; steps are backtracked and only
    improvements are kept, so the returned error is <= the input error.
    """
    basis_cross = np.stack([np.cross(np.eye(3)[j], a) for j in range(3)], axis=2)  # (L, 3, 3)
    for _ in range(_GN_MAX_ITERS):
        rotated = a @ rotation.T
        model = scale * rotated[:, :2]
        resid = (b - model).reshape(-1)
        # d(model)/d(rotvec_j) = scale * (R (e_j x a))_xy, d(model)/d(log f) = model
        deriv = scale * np.einsum("rc,lcj->lrj", rotation[:2], basis_cross)
        jac = np.concatenate([deriv.reshape(-1, 3), model.reshape(-1, 1)], axis=1)
        normal = jac.T @ jac
        rhs = jac.T @ resid
        try:
            step = np.linalg.solve(normal, rhs)
        except np.linalg.LinAlgError:
            break
        improved = False
        for _ in range(6):
            cand_rot = rotation @ _rotation_from_vector(step[:3])
            cand_scale = scale * float(np.exp(step[3]))
            cand_err = _image_error(b, a, cand_scale, cand_rot)
            if cand_err <= err:
                gain = err - cand_err
                rotation, scale, err = cand_rot, cand_scale, cand_err
                improved = True
                break
            step = step / 2.0
        if not improved or gain <= _GN_RTOL * err + atol:
            break
    return scale, rotation, err


def fit_pose(observed: Landmarks2D, shape: Landmarks3D, init: Pose | None = None) -> Pose:
    """Least-squares weak-perspective alignment of a 3D shape to 2D landmarks.

    Centroids are removed, rotation comes from the orthogonal-Procrustes
    solution of the cross-covariance against depth-lifted 2D points
    (reflections corrected by sign-flipping the smallest singular direction),
    scale is the standard Procrustes ratio, and the translation matches
    centroids. The depth lift is iterated and then polished by Gauss-Newton
    so the returned pose minimizes the image-plane residual to machine
    precision. Warm-starting from ``init`` guarantees the residual of the
    result is no worse than that of ``init``.
    """
    _check_pair(observed, shape)
    pts3 = shape.as_points()
    pts2 = observed.as_points()

    centroid3 = pts3.mean(axis=0)
    centroid2 = pts2.mean(axis=0)
    a = pts3 - centroid3
    b = pts2 - centroid2
    a_energy = float(np.sum(a**2))
    if a_energy <= 0.0:
        raise DegenerateGeometryError("all 3D landmarks coincide")
    # Error floor for stopping: the objective is bounded by the raw 2D energy.
    atol = 1e-26 * max(float(np.sum(b**2)), 1.0)

    if init is None:
        z = np.zeros(len(a))
        lift_iters = _LIFT_COLD_ITERS
    else:
        z = init.scale * (a @ init.rotation.T)[:, 2]
        lift_iters = _LIFT_WARM_ITERS
    scale, rotation, err = _lift_rounds(b, a, z, a_energy, lift_iters, atol)
    scale, rotation, err = _polish_pose(b, a, scale, rotation, err, atol)

    translation = centroid2 - scale * (rotation @ centroid3)[:2]
    return Pose(scale=scale, rotation=rotation, translation=translation)


def _design_matrix(pose: Pose, basis: ShapeBasis) -> np.ndarray:
    """Jacobian of projected landmarks w.r.t. all coefficients, (2L, K_id + K_exp)."""
    cam = pose.scale * pose.rotation[:2]
    columns = np.einsum("ab,lbk->lak", cam, basis.combined_blocks)
    return columns.reshape(2 * basis.landmark_count, -1)


def _ridge_diagonal(pose: Pose, basis: ShapeBasis, opts: FitOptions) -> np.ndarray:
    weights = np.concatenate(
        [opts.lambda_id / basis.id_scales**2, opts.lambda_exp / basis.exp_scales**2]
    )
    return pose.scale**2 * weights


def coefficient_objective(
    observed: Landmarks2D, pose: Pose, basis: ShapeBasis, coeffs: Coefficients, opts: FitOptions
) -> float:
    """Data term plus scale-normalized ridge terms; what fit_coefficients minimizes."""
    shape = reconstruct_shape(basis, coeffs)
    diff = observed.points - project(pose, shape).points
    alpha = np.concatenate([coeffs.alpha_id, coeffs.alpha_exp])
    ridge = _ridge_diagonal(pose, basis, opts)
    return float(np.sum(diff**2) + np.sum(ridge * alpha**2))


def fit_coefficients(
    observed: Landmarks2D, pose: Pose, basis: ShapeBasis, opts: FitOptions = FitOptions()
) -> Coefficients:
    """Solve the ridge-regularized linear least squares for all coefficients."""
    if observed.landmark_count != basis.landmark_count:
        raise DimensionMismatchError(
            f"observed has {observed.landmark_count} landmarks, basis has {basis.landmark_count}"
        )
    target = observed.points - project(pose, Landmarks3D(basis.mean_shape)).points
    design = _design_matrix(pose, basis)
    normal = design.T @ design
    normal[np.diag_indices_from(normal)] += _ridge_diagonal(pose, basis, opts)
    rhs = design.T @ target
    try:
        alpha = cho_solve(cho_factor(normal), rhs)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"coefficient normal equations are not positive definite: {exc}") from exc
    if not np.all(np.isfinite(alpha)):
        raise SolverError("coefficient solve produced non-finite values")
    return Coefficients(alpha[: basis.n_id], alpha[basis.n_id :])


def fit(
    observed: Landmarks2D,
    basis: ShapeBasis,
    opts: FitOptions = FitOptions(),
    residual_trace: list | None = None,
) -> FitResult:
    """Alternate exact pose and coefficient solves from the mean shape.

    Stops when the relative change of the reprojection residual drops below
    ``opts.tol``, or the residual itself falls below ``opts.tol`` pixels
    (noiseless fits converge to zero, where relative change is meaningless),
    or after ``opts.max_iters`` rounds (not an error; the flag is simply
    False). ``residual_trace``, if given, collects the per-round reprojection
    residual starting with the alpha = 0 baseline.
    """
    coeffs = Coefficients.zeros(basis)
    shape = Landmarks3D(basis.mean_shape)
    pose = fit_pose(observed, shape)
    prev = residual_rms(observed, pose, shape)
    if residual_trace is not None:
        residual_trace.append(prev)
    current = prev
    iterations = 0
    converged = False
    for iterations in range(1, opts.max_iters + 1):
        coeffs = fit_coefficients(observed, pose, basis, opts)
        shape = reconstruct_shape(basis, coeffs)
        pose = fit_pose(observed, shape, init=pose)
        current = residual_rms(observed, pose, shape)
        if residual_trace is not None:
            residual_trace.append(current)
        if current <= opts.tol or abs(prev - current) <= opts.tol * prev:
            converged = True
            break
        prev = current
    return FitResult(
        pose=pose,
        coeffs=coeffs,
        residual_rms=current,
        iterations=iterations,
        converged=converged,
    )
