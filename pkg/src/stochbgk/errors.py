"""Exceptions raised by the solver stack."""


class BlowUp(FloatingPointError):
    """Non-finite state encountered; carries the step index."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class SupportViolation(RuntimeError):
    """The solution reached the edge of the truncated velocity box."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class ConvergenceFailure(RuntimeError):
    """An iteration did not reach its tolerance."""
