__all__ = [
    "BoundChainError",
    "InvalidStateError",
    "QubitIndexError",
    "DensifyLimitError",
    "ProtocolError",
    "BlindnessViolation",
    "SampledModeError",
    "ConfigError",
]


class BoundChainError(Exception):
    pass


class InvalidStateError(BoundChainError, ValueError):
    pass


class QubitIndexError(BoundChainError, IndexError):
    pass


class DensifyLimitError(BoundChainError):
    pass


class ProtocolError(BoundChainError):
    pass


class BlindnessViolation(ProtocolError):
    """A correction was keyed by an outcome nobody announced."""


class SampledModeError(BoundChainError):
    pass


class ConfigError(BoundChainError):
    def __init__(self, message: str, diagnostics: list[str] | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []

    def __str__(self) -> str:
        if not self.diagnostics:
            return super().__str__()
        return "\n".join([super().__str__(), *self.diagnostics])
