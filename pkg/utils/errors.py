"""
Exception hierarchy for the scheduling simulator.
Input problems derive from ValueError, internal construction failures from RuntimeError.
"""


class RejectSchedError(Exception):
    """Base class for all simulator errors."""


class InstanceError(RejectSchedError, ValueError):
    """Malformed or invalid instance data."""


class ModelMismatchError(RejectSchedError, ValueError):
    """Engine called on an instance of another model."""


class ParameterError(RejectSchedError, ValueError):
    """Invalid epsilon, alpha, or generator range."""


class GridError(RejectSchedError, ValueError):
    """Speed/time grid misconfigured or a job admits no strategy."""


class InstanceTooLargeError(RejectSchedError, ValueError):
    """Instance exceeds the brute-force enumeration cap."""


class MappingConstructionError(RejectSchedError, RuntimeError):
    """Pending-set partition could not be built from a flow trace."""


class UnverifiedDualsError(RejectSchedError, RuntimeError):
    """Dual objective requested from a result with violated constraints."""


class EngineCommitError(RejectSchedError, RuntimeError):
    """Engine under adversarial test returned an invalid execution."""
