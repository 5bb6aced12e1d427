"""Exception hierarchy shared by every RegionAtlas module."""

from typing import Optional, Sequence


class RegionAtlasError(Exception):
    "Base class for errors raised by the toolkit."


class InvalidInputError(RegionAtlasError, ValueError):
    "Raised when a graph, spec, parameter set or slice is malformed."


class HypothesisError(RegionAtlasError, ValueError):
    "Raised when the widths violate N_l >= N_0 on the intermediate layers."


class CapExceededError(RegionAtlasError):
    "Raised when an exact computation would exceed its configured size cap."


class SolverError(RegionAtlasError):
    "Raised when the simplex hits its iteration cap."

    def __init__(self, message: str, basis: Optional[Sequence[int]] = None,
                 pattern: Optional[str] = None):
        super().__init__(message)
        self.basis = list(basis) if basis is not None else None
        self.pattern = pattern
