import numpy as np
import pytest


def oval_face_landmarks(rng: np.random.Generator, center=(256.0, 256.0), span=180.0):
    """68 plausible in-bounds landmarks: an oval outline plus interior points."""
    cx, cy = center
    theta = np.linspace(0, 2 * np.pi, 40, endpoint=False)
    outline = np.column_stack(
        [cx + 0.5 * span * np.cos(theta), cy + 0.62 * span * np.sin(theta)]
    )
    interior = np.column_stack(
        [
            cx + rng.uniform(-0.3, 0.3, 28) * span,
            cy + rng.uniform(-0.35, 0.35, 28) * span,
        ]
    )
    return np.vstack([outline, interior])


@pytest.fixture
def rng():
    return np.random.default_rng(77)
