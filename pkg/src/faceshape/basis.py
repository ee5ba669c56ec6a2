"""Linear 3D shape model: mean landmark cloud plus identity/expression bases.

A shape is reconstructed as ``mean + id_basis @ alpha_id + exp_basis @ alpha_exp``.
Basis columns are unit principal directions; the per-component standard
deviations live in ``id_scales`` / ``exp_scales`` so coefficients carry the
variance. Vectors of length 3L interleave coordinates as (x1, y1, z1, x2, ...).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .docio import FORMAT_VERSION, expect_fields, expect_version, read_document, write_document
from .errors import DimensionMismatchError, SchemaError

MIN_ID_COMPONENTS = 20  # feature selection needs at least this many identity dims
MIN_LANDMARKS = 22

# Synthetic-basis spectrum: scale_j = LEAD * (j+1)^(-POWER), strictly decreasing.
_SCALE_POWER = 0.7
_ID_LEAD_SCALE = 10.0
_EXP_LEAD_SCALE = 5.0
_MEAN_FACE_SPAN = 200.0  # model units across the x extent


@dataclass(frozen=True)
class ShapeBasis:
    """Mean shape and orthonormal identity/expression principal directions."""

    landmark_count: int
    mean_shape: np.ndarray       # (3L,)
    id_basis: np.ndarray         # (3L, K_id)
    exp_basis: np.ndarray        # (3L, K_exp)
    id_scales: np.ndarray        # (K_id,) strictly decreasing, positive
    exp_scales: np.ndarray       # (K_exp,) strictly decreasing, positive
    basis_id: str = ""

    def __post_init__(self):
        L = self.landmark_count
        object.__setattr__(self, "mean_shape", np.asarray(self.mean_shape, dtype=float))
        object.__setattr__(self, "id_basis", np.asarray(self.id_basis, dtype=float))
        object.__setattr__(self, "exp_basis", np.asarray(self.exp_basis, dtype=float))
        object.__setattr__(self, "id_scales", np.asarray(self.id_scales, dtype=float))
        object.__setattr__(self, "exp_scales", np.asarray(self.exp_scales, dtype=float))
        if self.mean_shape.shape != (3 * L,):
            raise DimensionMismatchError(
                f"mean_shape has shape {self.mean_shape.shape}, expected ({3 * L},)"
            )
        k_id, k_exp = self.n_id, self.n_exp
        if k_id < MIN_ID_COMPONENTS:
            raise SchemaError(f"K_id = {k_id} is below the minimum of {MIN_ID_COMPONENTS}")
        if self.id_basis.shape != (3 * L, k_id) or self.exp_basis.shape != (3 * L, k_exp):
            raise DimensionMismatchError("basis matrices inconsistent with landmark count")
        if self.id_scales.shape != (k_id,) or self.exp_scales.shape != (k_exp,):
            raise DimensionMismatchError("scale vectors inconsistent with basis widths")
        for name, arr in (
            ("mean_shape", self.mean_shape),
            ("id_basis", self.id_basis),
            ("exp_basis", self.exp_basis),
            ("id_scales", self.id_scales),
            ("exp_scales", self.exp_scales),
        ):
            if not np.all(np.isfinite(arr)):
                raise SchemaError(f"{name} contains non-finite entries")
        for name, scales in (("id_scales", self.id_scales), ("exp_scales", self.exp_scales)):
            if np.any(scales <= 0):
                raise SchemaError(f"{name} must be strictly positive")
            if scales.size > 1 and np.any(np.diff(scales) >= 0):
                raise SchemaError(f"{name} must be strictly decreasing")

    @property
    def n_id(self) -> int:
        return self.id_basis.shape[1]

    @property
    def n_exp(self) -> int:
        return self.exp_basis.shape[1]

    @cached_property
    def mean_points(self) -> np.ndarray:
        """Mean shape as an (L, 3) read-only view-like array."""
        pts = self.mean_shape.reshape(self.landmark_count, 3)
        pts.flags.writeable = False
        return pts

    @cached_property
    def combined_blocks(self) -> np.ndarray:
        """Both bases stacked as (L, 3, K_id + K_exp), precomputed for fitting."""
        combined = np.concatenate([self.id_basis, self.exp_basis], axis=1)
        blocks = combined.reshape(self.landmark_count, 3, combined.shape[1])
        blocks.flags.writeable = False
        return blocks


@dataclass(frozen=True)
class Coefficients:
    """Identity and expression weights for one reconstructed shape."""

    alpha_id: np.ndarray
    alpha_exp: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha_id", np.asarray(self.alpha_id, dtype=float))
        object.__setattr__(self, "alpha_exp", np.asarray(self.alpha_exp, dtype=float))
        if self.alpha_id.ndim != 1 or self.alpha_exp.ndim != 1:
            raise DimensionMismatchError("coefficient vectors must be one-dimensional")
        if not (np.all(np.isfinite(self.alpha_id)) and np.all(np.isfinite(self.alpha_exp))):
            raise SchemaError("coefficients contain non-finite entries")

    @classmethod
    def zeros(cls, basis: ShapeBasis) -> "Coefficients":
        return cls(np.zeros(basis.n_id), np.zeros(basis.n_exp))


@dataclass(frozen=True)
class Landmarks3D:
    """Flat (3L,) vector of 3D landmark positions."""

    points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))
        if self.points.ndim != 1 or self.points.size % 3 != 0:
            raise DimensionMismatchError("3D landmark vector length must be a multiple of 3")
        if not np.all(np.isfinite(self.points)):
            raise SchemaError("3D landmarks contain non-finite entries")

    @property
    def landmark_count(self) -> int:
        return self.points.size // 3

    def as_points(self) -> np.ndarray:
        return self.points.reshape(-1, 3)


def reconstruct_shape(basis: ShapeBasis, coeffs: Coefficients) -> Landmarks3D:
    """Linear combination mean + id_basis @ alpha_id + exp_basis @ alpha_exp."""
    if coeffs.alpha_id.shape != (basis.n_id,):
        raise DimensionMismatchError(
            f"alpha_id has length {coeffs.alpha_id.size}, basis has {basis.n_id} identity components"
        )
    if coeffs.alpha_exp.shape != (basis.n_exp,):
        raise DimensionMismatchError(
            f"alpha_exp has length {coeffs.alpha_exp.size}, basis has {basis.n_exp} expression components"
        )
    pts = basis.mean_shape + basis.id_basis @ coeffs.alpha_id + basis.exp_basis @ coeffs.alpha_exp
    return Landmarks3D(pts)


def _mean_face_template(L: int) -> np.ndarray:
    """Deterministic face-like shell: front half of an ellipsoid, spiral-sampled.

    Not anatomical; it only needs full-rank 3D scatter and a ~200-unit span.
    """
    i = np.arange(L)
    golden = np.pi * (3.0 - np.sqrt(5.0))
    depth = (i + 0.5) / L                   # in (0, 1), toward the camera
    ring = np.sqrt(1.0 - depth**2)
    phi = i * golden
    a, b, c = _MEAN_FACE_SPAN / 2.0, 130.0, 80.0
    pts = np.column_stack([a * ring * np.cos(phi), b * ring * np.sin(phi), c * depth])
    # Normalize the x span to exactly _MEAN_FACE_SPAN so pixel scale is predictable.
    span = pts[:, 0].max() - pts[:, 0].min()
    pts *= _MEAN_FACE_SPAN / span
    return pts.reshape(-1)


def synthesize_basis(L: int, K_id: int, K_exp: int, seed: int) -> ShapeBasis:
    """Build a reproducible synthetic basis with mutually orthonormal columns."""
    if L < MIN_LANDMARKS:
        raise SchemaError(f"need at least {MIN_LANDMARKS} landmarks, got {L}")
    if K_id < MIN_ID_COMPONENTS:
        raise SchemaError(f"K_id must be at least {MIN_ID_COMPONENTS}, got {K_id}")
    if K_exp < 1:
        raise SchemaError("K_exp must be positive")
    if 2 * L < K_id + K_exp + 7:
        raise SchemaError(
            f"2L = {2 * L} is too small for K_id + K_exp + 7 = {K_id + K_exp + 7}; "
            "the fit would be unidentifiable"
        )

    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((3 * L, K_id + K_exp))
    q, r = np.linalg.qr(raw)
    q = q * np.sign(np.diag(r))  # fix QR sign convention for reproducibility

    j_id = np.arange(1, K_id + 1, dtype=float)
    j_exp = np.arange(1, K_exp + 1, dtype=float)
    return ShapeBasis(
        landmark_count=L,
        mean_shape=_mean_face_template(L),
        id_basis=q[:, :K_id],
        exp_basis=q[:, K_id:],
        id_scales=_ID_LEAD_SCALE * j_id ** (-_SCALE_POWER),
        exp_scales=_EXP_LEAD_SCALE * j_exp ** (-_SCALE_POWER),
        basis_id=f"synth:L{L}:Kid{K_id}:Kexp{K_exp}:seed{seed}",
    )


def save_basis(basis: ShapeBasis, path) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "basis_id": basis.basis_id,
        "L": basis.landmark_count,
        "K_id": basis.n_id,
        "K_exp": basis.n_exp,
        "mean_shape": basis.mean_shape.tolist(),
        "id_basis": basis.id_basis.reshape(-1).tolist(),     # row-major
        "exp_basis": basis.exp_basis.reshape(-1).tolist(),   # row-major
        "id_scales": basis.id_scales.tolist(),
        "exp_scales": basis.exp_scales.tolist(),
    }
    write_document(doc, path)


def load_basis(path) -> ShapeBasis:
    doc = read_document(path)
    expect_fields(
        doc,
        ["format_version", "basis_id", "L", "K_id", "K_exp", "mean_shape",
         "id_basis", "exp_basis", "id_scales", "exp_scales"],
        path,
    )
    expect_version(doc, path)
    L, k_id, k_exp = doc["L"], doc["K_id"], doc["K_exp"]
    try:
        basis = ShapeBasis(
            landmark_count=L,
            mean_shape=np.asarray(doc["mean_shape"], dtype=float),
            id_basis=np.asarray(doc["id_basis"], dtype=float).reshape(3 * L, k_id),
            exp_basis=np.asarray(doc["exp_basis"], dtype=float).reshape(3 * L, k_exp),
            id_scales=np.asarray(doc["id_scales"], dtype=float),
            exp_scales=np.asarray(doc["exp_scales"], dtype=float),
            basis_id=str(doc["basis_id"]),
        )
    except (ValueError, TypeError, DimensionMismatchError) as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    return basis
