"""Exception types shared across the engine."""


class AecError(Exception):
    """Base class for all engine errors."""


class ConfigurationError(AecError):
    """Sizes, rates or options that violate the engine's fixed conventions."""


class StreamError(AecError):
    """Invalid samples (NaN/Inf) or misuse of a live session."""


class ModelFormatError(AecError):
    """Corrupt, truncated or mismatched network weight files."""


class WavFormatError(AecError):
    """WAV files that are not PCM 16-bit mono at the engine sample rate."""
