"""Exception hierarchy shared by the analytical model, optimizer and simulator."""


class PacketizationError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(PacketizationError, ValueError):
    """Argument lies outside the real domain of the principal Lambert W branch."""


class InvalidPacketSize(PacketizationError, ValueError):
    pass


class RateOverflow(PacketizationError, ValueError):
    """Per-slot packet arrival rate reached 1 and is no longer a probability."""


class SaturationError(PacketizationError):
    """The queue has no steady state at this operating point."""


class InfeasibleError(PacketizationError):
    """No packet size can keep the network unsaturated."""


class NoFiniteDelayError(PacketizationError):
    pass


class BracketError(PacketizationError):
    """The optimal-packet-size ordering required by the threshold search is violated."""

    def __init__(self, message, ratio=None):
        super().__init__(message)
        self.ratio = ratio


class FitError(PacketizationError, ValueError):
    pass


class ConfigError(PacketizationError, ValueError):
    pass
