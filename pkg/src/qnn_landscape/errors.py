"""Exception hierarchy shared by all modules."""


class QNNError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(QNNError, ValueError):
    pass


class IntegrityError(QNNError):
    """A numerical invariant (hermiticity, unit trace, real output...) was violated."""


class CapacityError(QNNError):
    """The requested computation is too large for the dense representation."""


class ConstructionError(QNNError):
    """A dataset construction is infeasible for the given circuit."""


class PeriodicityError(QNNError):
    def __init__(self, axis: int, residual: float):
        self.axis = axis
        self.residual = residual
        super().__init__(
            f"loss is not pi-periodic along axis {axis} (residual {residual:.3e})"
        )


class DegenerateLandscapeError(QNNError):
    """Critical points are not isolated, so counting them is meaningless."""
