"""Exception taxonomy shared by all modules.

The CLI maps these onto its exit codes: configuration problems -> 2,
numeric failures -> 3, unstable queues -> 4, copula incompatibility -> 5.
"""


class MapqError(Exception):
    """Base class for all package errors."""


class ConfigError(MapqError):
    """Configuration document failed to parse or validate."""


class MgfDiverged(MapqError):
    """Moment generating function quadrature failed to converge."""


class NoConvergence(MapqError):
    """Eigen iteration residual stayed above tolerance at the iteration cap."""


class UnstableQueue(MapqError):
    """Mean arrival rate is not below the mean service rate."""

    def __init__(self, arrival_rate, service_rate):
        self.arrival_rate = arrival_rate
        self.service_rate = service_rate
        super().__init__(
            f"unstable queue: mean arrival {arrival_rate!r} >= mean service {service_rate!r}"
        )


class NoRootInDomain(MapqError):
    """The combined cgf never recrosses zero inside the MGF finiteness domain."""


class NoDerivativeRoot(MapqError):
    """The finite-horizon derivative equation has no root in the domain."""


class NoFixedPoint(MapqError):
    """Fixed-point iteration failed to converge within the iteration cap."""


class OutOfUnitInterval(MapqError):
    """Copula argument outside [0, 1]."""


class ZeroMassState(MapqError):
    """Transition extraction requires strictly positive state masses."""


class IncompatibleCopula(MapqError):
    """Copula/marginal pair produced a genuinely negative transition mass."""


class LengthMismatch(MapqError):
    """Paired sample paths must have equal length."""


class DimensionMismatch(MapqError):
    """Sample matrices must have matching column dimensions."""


class UnknownExperiment(MapqError):
    """Ordering experiment name not recognized."""
