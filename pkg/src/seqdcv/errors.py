"""Exception hierarchy shared by every module."""


class SeqDCVError(Exception):
    """Base class for all package errors."""


class InputError(SeqDCVError, ValueError):
    """Malformed inputs: shape mismatches, non-finite values, bad parameters."""


class DegenerateResponseError(SeqDCVError):
    """The response has zero variance where a non-constant one is required."""


class ConvergenceError(SeqDCVError):
    """Coordinate descent hit its sweep limit.

    ``gap`` is the largest coordinate change of the final sweep, a cheap proxy
    for the remaining duality gap.
    """

    def __init__(self, message: str, gap: float):
        super().__init__(message)
        self.gap = gap


class SimulationError(SeqDCVError):
    """A simulated design could not be constructed."""
