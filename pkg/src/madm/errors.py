class ConvergenceError(RuntimeError):
    """A truncated series or grid failed its stopping rule within ``max_terms``."""


class StateSpaceTooLarge(ValueError):
    """The truncated state space would not fit in memory."""
