"""Constraint-based denoising of automatic passenger counting data."""

from .model import (
    Course,
    DenoiseConfig,
    OccupancyProfile,
    Stop,
    StopCounts,
    TicketingCounts,
    ValidityReport,
    Violation,
    compute_occupancy,
    validate_course,
)

__version__ = "0.1.0"

__all__ = [
    "Course",
    "DenoiseConfig",
    "OccupancyProfile",
    "Stop",
    "StopCounts",
    "TicketingCounts",
    "ValidityReport",
    "Violation",
    "compute_occupancy",
    "validate_course",
    "__version__",
]
