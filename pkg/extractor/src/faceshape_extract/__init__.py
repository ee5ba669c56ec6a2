"""Landmark extraction adapter for the faceshape verification pipeline."""

from .detectors import MarkerDetector, get_detector, render_marker_image
from .extract import ExtractionRecord, extract

__version__ = "0.1.0"
