"""Exception and warning types raised by crossnoise."""


class CrossNoiseError(Exception):
    """Base class for all crossnoise errors."""


class InvalidInput(CrossNoiseError, ValueError):
    pass


class RateMismatch(CrossNoiseError, ValueError):
    pass


class TooShort(CrossNoiseError, ValueError):
    """Waveform is shorter than a single analysis frame."""


class InsufficientNoise(CrossNoiseError):
    """The VAD found too few noise-only frames to trust a noise estimate."""


class MissingEstimate(CrossNoiseError):
    """An utterance lacks the noise estimate or clean power an operation needs."""


class FormatError(CrossNoiseError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NotMono(FormatError):
    pass


class DuplicateId(CrossNoiseError, ValueError):
    pass


class CorpusIOError(CrossNoiseError, OSError):
    pass


class ClampWarning(UserWarning):
    """Estimated noise power reached or exceeded the noisy-signal power."""
