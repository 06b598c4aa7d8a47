"""Exception types shared across the package."""


class AudiomorphError(Exception):
    """Base class for all package-specific errors."""


class WavFormatError(AudiomorphError):
    """Raised for a malformed or truncated RIFF/WAVE header or payload."""


class UnsupportedCodecError(WavFormatError):
    """Raised for well-formed WAV files whose encoding we do not decode."""


class ParameterError(AudiomorphError, ValueError):
    """Raised when an operation parameter is outside its documented range."""


class DomainError(AudiomorphError, ValueError):
    """Raised when an input is outside an operation's domain (e.g. silent
    audio where an SNR is required, or a clip shorter than one frame)."""


class ConfigError(AudiomorphError):
    """Raised for invalid campaign/backend configuration documents.

    ``field`` names the offending entry so CLI errors can point at it.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class BackendUnavailableError(AudiomorphError):
    """Raised when a backend cannot produce a verdict (network failure
    after all retries, unreachable service).  Campaigns record the case
    as unanswered and continue."""


class MissingFixtureError(AudiomorphError):
    """Raised when a fixture backend has no entry for a content digest."""


class ResponseMappingError(AudiomorphError):
    """Raised when a provider response cannot be mapped onto a verdict."""


class CampaignError(AudiomorphError):
    """Raised when a campaign cannot proceed at all (every backend down,
    artifact directory unwritable)."""
