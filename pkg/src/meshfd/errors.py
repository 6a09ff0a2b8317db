"""Exception types shared across the toolkit."""


class MeshfdError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(MeshfdError, ValueError):
    """Malformed arguments: dimension mismatch, empty input, bad parameter range."""


class NotAnInterpolationSetError(MeshfdError):
    """A node/space pairing is not uniquely solvable for interpolation."""

    def __init__(self, message, rank=None, dim=None, n_nodes=None):
        super().__init__(message)
        self.rank = rank
        self.dim = dim
        self.n_nodes = n_nodes


class UnsolvableExactnessError(MeshfdError):
    """The exactness conditions for a weight row cannot be satisfied."""

    def __init__(self, message, rank=None, n_conditions=None, defect=None):
        super().__init__(message)
        self.rank = rank
        self.n_conditions = n_conditions
        self.defect = defect


class ConstructionError(MeshfdError):
    """A composite object (node cloud, patch collection) violates a build contract."""


class ContractError(MeshfdError):
    """An operation was invoked on an object that does not meet its precondition."""


class InconsistentSplineError(MeshfdError):
    """Patch values disagree at a shared node beyond tolerance."""


class SingularSystemError(MeshfdError):
    """A square global system could not be factorized."""

    def __init__(self, message, cond_estimate=None):
        super().__init__(message)
        self.cond_estimate = cond_estimate


class CoverageError(MeshfdError):
    """An evaluation point is not covered by any partition-of-unity ball."""


class AnalysisSizeError(MeshfdError):
    """A dense analysis was requested beyond its size guard."""


class AssemblyError(MeshfdError):
    """A global-system row could not be computed."""

    def __init__(self, message, row=None, patch=None):
        super().__init__(message)
        self.row = row
        self.patch = patch


class ConfigError(MeshfdError):
    """A run configuration is incomplete or inconsistent."""
