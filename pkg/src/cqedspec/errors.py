"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid input. ``field`` names the offending field or config path."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class NumericalError(ArithmeticError):
    """A numerical method failed (instability, non-convergence, singular system)."""
