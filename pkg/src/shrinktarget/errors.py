"""Exception types shared by the labs and mapped to CLI exit codes."""


class PrecisionError(ArithmeticError):
    """A certified decision or value needs more bits than the configured budget allows."""

    def __init__(self, message: str, required_bits: int | None = None):
        super().__init__(message)
        self.required_bits = required_bits


class BudgetError(RuntimeError):
    """An exact computation would exceed the configured piece budget."""

    def __init__(self, message: str, required: int | None = None, cap: int | None = None):
        super().__init__(message)
        self.required = required
        self.cap = cap


class UncertainOrderError(ValueError):
    """Interval endpoints are closer than their error bounds, so lo <= hi is undecidable."""
