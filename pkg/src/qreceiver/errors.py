"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An argument breaks a documented precondition (malformed tree, off-grid action, ...)."""


class DegenerateEvidence(ValueError):
    """Both hypotheses assign zero likelihood to the observed outcome."""


class CapacityError(RuntimeError):
    """A requested enumeration is too large to run."""


class ScheduleError(ValueError):
    """A confidence schedule produced a probability outside (0, 1]."""
