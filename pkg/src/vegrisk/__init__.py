"""Outage-risk modeling for overhead distribution lines.

Daily weather, vegetation index, and outage records go in; a fitted
logistic risk model, rate reports, and calibration heatmaps come out.
"""

__version__ = "0.1.0"

from .errors import ComputeError, ValidationError, VegriskError  # noqa: F401
from .features import FeatureTable, ScalingParams  # noqa: F401
from .ingest import DailySample  # noqa: F401
from .model import LogisticModel  # noqa: F401
