"""Exception types raised by the solver."""


class DomainError(ValueError):
    """An input violates a model invariant."""


class FeasibilityDrift(RuntimeError):
    """An integrated inventory left the feasible polytope."""


class NoConvergence(RuntimeError):
    """An iterative solver exhausted its budget."""


class SingularSystem(RuntimeError):
    pass


class DivergenceError(RuntimeError):
    """Value functions blew past the configured bound."""


class TooManySwitches(RuntimeError):
    """A strategy path switched more often than allowed (oscillation)."""


class Unsupported(ValueError):
    pass
