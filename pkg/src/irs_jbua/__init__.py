"""Joint beamforming and user association for dual-tier IRS-assisted FR3 downlinks."""

from irs_jbua.errors import (
    DegenerateGeometryError,
    InfeasibleMatchingError,
    InvalidAssignmentError,
    InvalidParameterError,
    IrsError,
    SingularChannelError,
    SizeGuardError,
)

__version__ = "0.1.0"

__all__ = [
    "DegenerateGeometryError",
    "InfeasibleMatchingError",
    "InvalidAssignmentError",
    "InvalidParameterError",
    "IrsError",
    "SingularChannelError",
    "SizeGuardError",
]
