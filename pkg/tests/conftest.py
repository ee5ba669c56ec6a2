import numpy as np
import pytest

from faceshape.basis import Coefficients, ShapeBasis, reconstruct_shape, synthesize_basis
from faceshape.projection import Landmarks2D, Pose, project


def rotation_matrix(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """Rz(roll) @ Ry(yaw) @ Rx(pitch), angles in radians."""
    cy, sy = np.cos(yaw), np.sin(yaw)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cr, sr = np.cos(roll), np.sin(roll)
    rz = np.array([[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
    return rz @ ry @ rx


def random_pose(rng: np.random.Generator, scale_range=(0.5, 2.0)) -> Pose:
    """A pose within the default synthetic-world ranges (±30/±15/±10 degrees)."""
    return Pose(
        scale=rng.uniform(*scale_range),
        rotation=rotation_matrix(
            np.deg2rad(rng.uniform(-30, 30)),
            np.deg2rad(rng.uniform(-15, 15)),
            np.deg2rad(rng.uniform(-10, 10)),
        ),
        translation=rng.uniform(-50, 50, 2),
    )


def random_coeffs(rng: np.random.Generator, basis: ShapeBasis) -> Coefficients:
    return Coefficients(
        rng.normal(0.0, basis.id_scales), rng.normal(0.0, basis.exp_scales)
    )


def synthetic_frame(
    rng: np.random.Generator, basis: ShapeBasis, noise_px: float = 0.0
) -> tuple[Landmarks2D, Pose, Coefficients]:
    """One observed frame with known ground-truth pose and coefficients."""
    pose = random_pose(rng)
    coeffs = random_coeffs(rng, basis)
    clean = project(pose, reconstruct_shape(basis, coeffs))
    points = clean.points
    if noise_px > 0:
        points = points + rng.normal(0.0, noise_px, points.size)
    return Landmarks2D(points), pose, coeffs


@pytest.fixture(scope="session")
def basis() -> ShapeBasis:
    return synthesize_basis(68, 40, 10, seed=1)


@pytest.fixture(scope="session")
def small_basis() -> ShapeBasis:
    return synthesize_basis(30, 20, 4, seed=3)
