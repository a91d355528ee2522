"""Exception hierarchy shared by every module of the package."""


class ConsensusError(Exception):
    """Base class for all errors raised by nlconsensus."""


# graph construction / decomposition
class GraphError(ConsensusError, ValueError):
    pass


class SelfLoop(GraphError):
    pass


class IndexOutOfRange(GraphError):
    pass


class Disconnected(GraphError):
    pass


class IsolatedVertex(GraphError):
    pass


class UnknownTopology(GraphError):
    pass


class BadSize(GraphError):
    pass


class EmptySubset(GraphError):
    pass


class InducedDisconnected(GraphError):
    pass


# numerics
class NumericalError(ConsensusError, ArithmeticError):
    pass


class EigenSolveFailure(NumericalError):
    pass


class NonFiniteState(NumericalError):
    pass


class BranchLost(NumericalError):
    def __init__(self, message, k=None):
        super().__init__(message)
        self.k = k


# contract violations on inputs
class ContractError(ConsensusError, ValueError):
    pass


class NonPositiveK(ContractError):
    pass


class AssumptionViolation(ContractError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NotAFixedPoint(ContractError):
    pass


class DimensionMismatch(ContractError):
    pass


class OrderPreconditionViolated(ContractError):
    pass


class PreconditionNotChecked(ContractError):
    pass


class NotAnEquilibrium(ContractError):
    pass


class NotNFSE(ContractError):
    pass


class NotOdd(ContractError):
    pass


class CohesionNotMet(ContractError):
    pass


class ConfigParseError(ConsensusError, ValueError):
    pass
