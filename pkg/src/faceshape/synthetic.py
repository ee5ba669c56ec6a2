"""Deterministic synthetic world for desk-scale detection experiments.

Subjects are sampled identities; frames render each identity under random
pose and expression, weak-perspective project it, and add landmark noise.
A face swap keeps the claimed subject label while rendering a different
subject's shape, which is exactly the geometric inconsistency the detector
measures. Escalating landmark noise stands in for pixel-level laundering.

Reproducibility contract: every frame is a pure function of
(config.seed, stream, frame_index). The noise is drawn as a standard normal
and scaled by sigma afterwards, so worlds that differ only in noise level
share their underlying poses, expressions, and noise directions; ladder
rungs therefore correspond frame-by-frame.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .basis import Coefficients, ShapeBasis, reconstruct_shape
from .docio import FORMAT_VERSION, write_document
from .errors import SchemaError
from .projection import Landmarks2D, Pose, project

FACE_SPAN_PX = 200.0
IMAGE_CENTER = (256.0, 256.0)
CENTER_JITTER_PX = 30.0

LADDER_MULTIPLIERS = (1.0, 2.0, 4.0, 8.0, 16.0)
ANISOTROPY_JITTER = 0.5  # per-frame identity jitter, units of id_scales

_STREAM_IDENTITY = 101
_STREAM_FRAMES = 202
_SWAP_STREAM_BASE = 1 << 20


@dataclass(frozen=True)
class WorldConfig:
    n_subjects: int
    frames_per_subject: int = 100  # enrollment segment length
    pose_ranges_deg: tuple[float, float, float] = (30.0, 15.0, 10.0)  # yaw, pitch, roll
    expression_sigma: float = 1.0
    landmark_noise_px: float = 0.5
    seed: int = 0
    id_jitter: float = 0.0
    id_jitter_isotropic: bool = False

    def __post_init__(self):
        if self.n_subjects < 1:
            raise SchemaError("n_subjects must be positive")
        if self.frames_per_subject < 1:
            raise SchemaError("frames_per_subject must be positive")
        if len(self.pose_ranges_deg) != 3 or any(r <= 0 for r in self.pose_ranges_deg):
            raise SchemaError("pose_ranges_deg must be three positive bounds")
        if self.expression_sigma < 0 or self.landmark_noise_px < 0 or self.id_jitter < 0:
            raise SchemaError("sigmas must be nonnegative")

    def as_document(self) -> dict:
        return {
            "n_subjects": self.n_subjects,
            "frames_per_subject": self.frames_per_subject,
            "pose_ranges_deg": list(self.pose_ranges_deg),
            "expression_sigma": self.expression_sigma,
            "landmark_noise_px": self.landmark_noise_px,
            "seed": self.seed,
            "id_jitter": self.id_jitter,
            "id_jitter_isotropic": self.id_jitter_isotropic,
        }


@dataclass(frozen=True)
class LabeledFrame:
    landmarks: Landmarks2D
    claimed_subject: str
    true_shape_subject: str
    noise_level: float
    frame_index: int

    @property
    def is_swap(self) -> bool:
        return self.claimed_subject != self.true_shape_subject


def subject_name(index: int) -> str:
    return f"s{index:03d}"


def sample_identity(basis: ShapeBasis, seed) -> Coefficients:
    """Identity coefficients drawn componentwise with the basis scales."""
    rng = np.random.default_rng([_STREAM_IDENTITY, *np.atleast_1d(seed)])
    return Coefficients(rng.normal(0.0, basis.id_scales), np.zeros(basis.n_exp))


def _rotation(yaw: float, pitch: float, roll: float) -> np.ndarray:
    cy, sy = np.cos(yaw), np.sin(yaw)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cr, sr = np.cos(roll), np.sin(roll)
    rz = np.array([[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
    return rz @ ry @ rx


def pixel_scale(basis: ShapeBasis) -> float:
    """Fixed camera scale placing the mean face at about FACE_SPAN_PX across."""
    xs = basis.mean_points[:, 0]
    return FACE_SPAN_PX / float(xs.max() - xs.min())


def _render_one(
    identity: Coefficients,
    basis: ShapeBasis,
    config: WorldConfig,
    stream: int,
    frame_index: int,
    noise_px: float,
    claimed: str,
    true_subject: str,
) -> LabeledFrame:
    rng = np.random.default_rng([_STREAM_FRAMES, config.seed, stream, frame_index])
    yaw_lim, pitch_lim, roll_lim = np.deg2rad(config.pose_ranges_deg)
    yaw = rng.uniform(-yaw_lim, yaw_lim)
    pitch = rng.uniform(-pitch_lim, pitch_lim)
    roll = rng.uniform(-roll_lim, roll_lim)
    translation = np.asarray(IMAGE_CENTER) + rng.uniform(-CENTER_JITTER_PX, CENTER_JITTER_PX, 2)
    alpha_exp = rng.normal(0.0, config.expression_sigma * basis.exp_scales)

    alpha_id = identity.alpha_id
    if config.id_jitter > 0:
        if config.id_jitter_isotropic:
            level = config.id_jitter * float(np.sqrt(np.mean(basis.id_scales**2)))
            jitter = rng.normal(0.0, level, basis.n_id)
        else:
            jitter = rng.normal(0.0, config.id_jitter * basis.id_scales)
        alpha_id = alpha_id + jitter

    pose = Pose(pixel_scale(basis), _rotation(yaw, pitch, roll), translation)
    clean = project(pose, reconstruct_shape(basis, Coefficients(alpha_id, alpha_exp)))
    points = clean.points
    noise = rng.standard_normal(points.size)  # drawn even for sigma=0: keeps streams aligned
    if noise_px > 0:
        points = points + noise_px * noise
    return LabeledFrame(
        landmarks=Landmarks2D(points),
        claimed_subject=claimed,
        true_shape_subject=true_subject,
        noise_level=noise_px,
        frame_index=frame_index,
    )


def render_frames(
    identity: Coefficients,
    basis: ShapeBasis,
    config: WorldConfig,
    true_subject: str = "",
    claimed_subject: str | None = None,
    stream: int = 0,
    frame_start: int = 0,
    n_frames: int | None = None,
    noise_px: float | None = None,
) -> list[LabeledFrame]:
    """Render labeled frames for one identity; deterministic per (seed, stream, index)."""
    n = config.frames_per_subject if n_frames is None else n_frames
    sigma = config.landmark_noise_px if noise_px is None else noise_px
    claimed = true_subject if claimed_subject is None else claimed_subject
    return [
        _render_one(identity, basis, config, stream, frame_start + i, sigma, claimed, true_subject)
        for i in range(n)
    ]


@dataclass(frozen=True)
class SyntheticWorld:
    basis: ShapeBasis
    config: WorldConfig
    subjects: dict  # name -> Coefficients

    @property
    def subject_names(self) -> list[str]:
        return list(self.subjects)

    def _stream(self, name: str) -> int:
        return self.subject_names.index(name)

    def enrollment_frames(self, name: str) -> list[LabeledFrame]:
        """The trusted registration segment, always at the base noise level."""
        return render_frames(
            self.subjects[name], self.basis, self.config,
            true_subject=name, stream=self._stream(name),
        )

    def heldout_frames(self, name: str, n: int, noise_px: float | None = None) -> list[LabeledFrame]:
        """Genuine frames disjoint from enrollment (indices continue past it)."""
        return render_frames(
            self.subjects[name], self.basis, self.config,
            true_subject=name, stream=self._stream(name),
            frame_start=self.config.frames_per_subject, n_frames=n, noise_px=noise_px,
        )

    def swap_frames(
        self, claimed: str, shape_source: str, n: int, noise_px: float | None = None
    ) -> list[LabeledFrame]:
        return make_swap(self, claimed, shape_source, n, noise_px)


def build_world(basis: ShapeBasis, config: WorldConfig) -> SyntheticWorld:
    subjects = {
        subject_name(i): sample_identity(basis, (config.seed, i))
        for i in range(config.n_subjects)
    }
    return SyntheticWorld(basis=basis, config=config, subjects=subjects)


def make_swap(
    world: SyntheticWorld,
    claimed: str,
    shape_source: str,
    n_frames: int | None = None,
    noise_px: float | None = None,
) -> list[LabeledFrame]:
    """Frames rendered from the source subject's shape but claiming another.

    This is the geometric content of a face swap: appearance (the claim)
    says one person, the underlying facial shape stays another's.
    """
    if claimed == shape_source:
        raise SchemaError(f"swap requires two distinct subjects, got {claimed!r} twice")
    if claimed not in world.subjects or shape_source not in world.subjects:
        raise SchemaError("both swap subjects must be enrolled in the world")
    names = world.subject_names
    stream = _SWAP_STREAM_BASE + names.index(claimed) * len(names) + names.index(shape_source)
    n = world.config.frames_per_subject if n_frames is None else n_frames
    return render_frames(
        world.subjects[shape_source], world.basis, world.config,
        true_subject=shape_source, claimed_subject=claimed,
        stream=stream, n_frames=n, noise_px=noise_px,
    )


def laundering_ladder(base_config: WorldConfig) -> list[WorldConfig]:
    """Escalating landmark-noise configs standing in for pixel laundering.

    Rung 0 is the base config itself; later rungs scale its noise by
    2, 4, 8, and 16 while everything else (including seeds) is held fixed.
    """
    return [
        replace(base_config, landmark_noise_px=base_config.landmark_noise_px * m)
        for m in LADDER_MULTIPLIERS
    ]


def anisotropy_scenario(basis: ShapeBasis, config: WorldConfig) -> WorldConfig:
    """World whose within-subject feature scatter is strongly anisotropic.

    Per-frame identity jitter proportional to the basis scales makes the
    enrolled covariance ill-conditioned, which is where covariance-aware
    distances should beat direction-only ones.
    """
    if basis.n_id < 2:
        raise SchemaError("anisotropy scenario needs at least two identity components")
    return replace(config, id_jitter=ANISOTROPY_JITTER, id_jitter_isotropic=False)


def isotropic_control(basis: ShapeBasis, config: WorldConfig) -> WorldConfig:
    """Control world with the same jitter energy spread isotropically."""
    if basis.n_id < 2:
        raise SchemaError("isotropic control needs at least two identity components")
    return replace(config, id_jitter=ANISOTROPY_JITTER, id_jitter_isotropic=True)


def write_world_manifest(world: SyntheticWorld, path, subject_files: dict | None = None) -> None:
    """Manifest tying ground truth, config, and frame files together."""
    doc = {
        "format_version": FORMAT_VERSION,
        "basis_id": world.basis.basis_id,
        "config": world.config.as_document(),
        "subjects": [
            {
                "subject_id": name,
                "alpha_id": world.subjects[name].alpha_id.tolist(),
                "files": (subject_files or {}).get(name, {}),
            }
            for name in world.subject_names
        ],
    }
    write_document(doc, path)
