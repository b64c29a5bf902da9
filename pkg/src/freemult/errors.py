"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration/usage problems
(ValueError family) exit with 2, numerical failures (RuntimeError family)
with 3, and failed verification checks with 1.
"""


class SizeLimitError(ValueError):
    """A combinatorial size cap was exceeded (the computation would blow up)."""


class OrderViolationError(ValueError):
    """Two objects were combined whose orders/refinement relation do not fit."""


class SingularTransformError(ValueError):
    """An S-transform was requested for a sequence with vanishing first moment."""


class UnsupportedModelError(ValueError):
    """The requested law/profile combination has no exact evaluation route."""


class DegenerateModelError(RuntimeError):
    """Sampling produced an object the estimator cannot use (e.g. zero trace)."""


class SolverError(RuntimeError):
    """An iterative solver failed to converge."""


class ResolutionError(RuntimeError):
    """A discretisation cannot resolve the requested scales."""
