"""Exception hierarchy shared by every module."""


class SupplyNetError(Exception):
    """Base class for all errors raised by supplynet."""


# network
class CycleError(SupplyNetError):
    pass


class BomMismatch(SupplyNetError):
    pass


class BoundsError(SupplyNetError):
    pass


class NonPositiveCost(SupplyNetError):
    pass


# demand
class DegenerateSupport(SupplyNetError):
    pass


class EmptySamples(SupplyNetError):
    pass


# solver
class InfeasibleBounds(SupplyNetError):
    pass


class StageOutOfRange(SupplyNetError):
    pass


class GridMiss(SupplyNetError):
    pass


class InstanceTooLarge(SupplyNetError):
    pass


# propagation / simulation
class MissingDistributorPmf(SupplyNetError):
    pass


class MissingPolicy(SupplyNetError):
    pass


class NegativeInventory(SupplyNetError):
    pass


# scenario files
class ParseError(SupplyNetError):
    pass


class SchemaError(SupplyNetError):
    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class UnknownFirm(SchemaError):
    pass


# pipeline
class PipelineError(SupplyNetError):
    """A pipeline stage failed; ``stage`` names it and ``cause`` keeps the original error."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage} failed: {type(cause).__name__}: {cause}")
