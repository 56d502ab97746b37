class DimensionError(ValueError):
    """Matrix shapes do not agree with the block partition."""


class ValidationError(ValueError):
    """A problem instance violates one or more structural assumptions."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NumericalError(ArithmeticError):
    """A factorization failed or a matrix is too badly conditioned to trust."""
