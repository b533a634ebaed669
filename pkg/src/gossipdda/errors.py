"""Exception hierarchy shared by all modules."""


class GossipDDAError(Exception):
    """Base class for every error raised by this package."""


class InvalidParam(GossipDDAError, ValueError):
    pass


class ConnectivityFailure(GossipDDAError, RuntimeError):
    pass


class ConvergenceFailure(GossipDDAError, RuntimeError):
    pass


class DimensionMismatch(GossipDDAError, ValueError):
    pass


class ProtocolError(GossipDDAError, RuntimeError):
    pass


class EmptyDataset(GossipDDAError, ValueError):
    pass


class SolveFailure(GossipDDAError, RuntimeError):
    pass


class EmptyBatch(GossipDDAError, ValueError):
    pass


class SamplerExhausted(GossipDDAError, RuntimeError):
    pass


class SamplesNotRetained(GossipDDAError, RuntimeError):
    pass


class MissingReferenceOptimum(GossipDDAError, RuntimeError):
    pass


class LengthMismatch(GossipDDAError, ValueError):
    pass


class IDXError(GossipDDAError, ValueError):
    """Malformed IDX file."""


class BadMagic(IDXError):
    pass


class TruncatedFile(IDXError):
    pass


class CountMismatch(IDXError):
    pass


class ConfigError(GossipDDAError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class EmptyResult(GossipDDAError, ValueError):
    pass
