"""Exception hierarchy shared across the loop's modules."""


class NeuroloopError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(NeuroloopError):
    """Invalid configuration value (bad spec, bad band, missing catalogue entry)."""


class ReplayParseError(NeuroloopError):
    """A replay file violates the recording format.

    Carries the 1-based line number where parsing failed.
    """

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class CalibrationError(NeuroloopError):
    """Calibration input is unusable (empty band sample set)."""


class CalibrationMissingError(NeuroloopError):
    """No calibration file present at startup."""

    def __init__(self, path):
        super().__init__(
            f"calibration file not found: {path}. Run `neuroloop calibrate` first."
        )
        self.path = path


class DataError(NeuroloopError):
    """A logged transition violates its invariants (bad behavior_prob, layout mismatch)."""


class TrainingError(NeuroloopError):
    """Training cannot proceed (empty dataset)."""


class GatewayError(NeuroloopError):
    """Base class for broker errors."""


class UnknownTopicError(GatewayError):
    """Publish or subscribe against a topic outside the closed set."""


class SchemaError(GatewayError):
    """Payload failed topic schema validation; message names the field path."""


class ReplayRangeError(GatewayError):
    """Requested from_seq is outside the retained window."""

    def __init__(self, requested: int, oldest: int, next_seq: int):
        super().__init__(
            f"from_seq {requested} outside retained window "
            f"[{oldest}, {next_seq}]; oldest available is {oldest}"
        )
        self.requested = requested
        self.oldest = oldest
        self.next_seq = next_seq


class PublishRetryExhausted(GatewayError):
    """Publishing kept failing after the configured retry budget."""
