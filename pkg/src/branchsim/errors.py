"""Exception hierarchy shared by every module."""


class BranchSimError(Exception):
    """Base class; the CLI maps subclasses onto exit codes."""

    exit_code = 3


class ShapeError(BranchSimError, ValueError):
    exit_code = 2


class CapacityExceeded(BranchSimError):
    exit_code = 4


class BasisError(BranchSimError, ValueError):
    exit_code = 2


class NormError(BranchSimError, ValueError):
    pass


class OperatorError(BranchSimError, ValueError):
    pass


class SingularPotential(BranchSimError, ValueError):
    exit_code = 2


class IntegratorDiverged(BranchSimError, ArithmeticError):
    pass


class GaugeInconsistency(BranchSimError, ArithmeticError):
    pass


class TimeOrderError(BranchSimError, ValueError):
    pass


class WeightError(BranchSimError, ValueError):
    pass


class SyncError(BranchSimError):
    pass


class HermiticityError(BranchSimError, ArithmeticError):
    pass


class IncompleteTrajectory(BranchSimError, ValueError):
    pass


class BoundaryError(BranchSimError, ValueError):
    pass


class TopologyError(BranchSimError, ValueError):
    pass


class ConfigError(BranchSimError, ValueError):
    exit_code = 2
