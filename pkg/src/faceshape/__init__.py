"""Face-swap detection from 3D facial-shape consistency."""

from .basis import (
    Coefficients,
    Landmarks3D,
    ShapeBasis,
    load_basis,
    reconstruct_shape,
    save_basis,
    synthesize_basis,
)
from .errors import (
    BasisMismatchError,
    DegenerateGeometryError,
    DimensionMismatchError,
    EnrollmentError,
    FaceShapeError,
    SchemaError,
    SolverError,
)
from .calibration import CalibrationResult, auc, calibrate_threshold, evaluate
from .detector import (
    Verdict,
    VideoVerdict,
    distance_histogram_clip,
    verify_frame,
    verify_video,
)
from .fitting import FitOptions, FitResult, fit, fit_coefficients, fit_pose
from .projection import Landmarks2D, Pose, project
from .synthetic import (
    LabeledFrame,
    SyntheticWorld,
    WorldConfig,
    anisotropy_scenario,
    build_world,
    isotropic_control,
    laundering_ladder,
    make_swap,
    render_frames,
    sample_identity,
)
from .template import (
    ShapeFeature,
    Template,
    cosine_distance,
    enroll,
    load_template,
    mahalanobis,
    save_template,
    select_features,
)

__version__ = "0.1.0"
