"""Exception types shared across the package."""


class BdsdeError(Exception):
    """Base class for package errors."""


class InvalidArgument(BdsdeError, ValueError):
    """A caller-supplied argument violates a documented precondition."""


class CapacityError(BdsdeError):
    """A requested sample cloud would exceed the configured memory cap."""


class EvaluationError(BdsdeError):
    """A user-supplied function produced a non-finite value."""


class NumericalDivergence(BdsdeError):
    """The backward sweep produced a NaN; carries the (outer, step) location."""

    def __init__(self, outer: int, step: int):
        self.outer = outer
        self.step = step
        super().__init__(f"NaN produced at outer sample {outer}, time step {step}")
