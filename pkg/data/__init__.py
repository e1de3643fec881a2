"""
Data layer: pydantic records and schema-versioned output writers.
"""

from .models import (
    BoundKind,
    BoundReport,
    CheckOutcome,
    ClosedFormComparison,
    ForceRegime,
    SweepRow,
)

__all__ = [
    "BoundKind",
    "BoundReport",
    "CheckOutcome",
    "ClosedFormComparison",
    "ForceRegime",
    "SweepRow",
]
