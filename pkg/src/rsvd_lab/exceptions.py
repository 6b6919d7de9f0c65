"""Exception and warning types raised across the package."""


class DimensionError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class ConvergenceError(RuntimeError):
    """An iterative kernel hit its iteration cap without converging."""


class RankCollapseError(RuntimeError):
    """A sketch lost numerical rank during orthogonalization.

    ``step`` is the half-step index at which the collapse was detected
    (0 for ``A @ Omega``, then 1, 2, ... for each subsequent product).
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class RowRankError(RuntimeError):
    """The leading block of ``V.T @ Omega`` is numerically row-rank deficient."""
