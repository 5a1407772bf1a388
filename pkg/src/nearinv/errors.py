class SpaceError(ValueError):
    """A space or spec failed validation; `path` names the offending field."""

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class NotDivisible(ArithmeticError):
    """Division by an inner function left a residual above tolerance."""

    def __init__(self, residual: float, relative: float):
        self.residual = residual
        self.relative = relative
        super().__init__(f"not divisible: residual {residual:.3e} (relative {relative:.3e})")


class HypothesisError(RuntimeError):
    """The contraction iteration met a step that violates the hypotheses."""

    def __init__(self, message: str, step: int | None = None, residual: float | None = None):
        self.step = step
        self.residual = residual
        super().__init__(message)


class ContainedInPhiH(RuntimeError):
    """Nonzero space inside phi*H with no defect space: only {0} can qualify."""
