"""Exception hierarchy shared by every stage of the pipeline."""


class SpamNetError(Exception):
    """Base class for all library errors."""


class ConfigError(SpamNetError, ValueError):
    """Invalid configuration value."""


class ReviewParseError(SpamNetError, ValueError):
    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ValidationError(SpamNetError, ValueError):
    """Input parsed but violates a domain invariant."""


class EmptyDatasetError(ValidationError):
    pass


class NotFoundError(SpamNetError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "not found"


class NoOverlapError(SpamNetError, ValueError):
    """A pair shares no product or category, so the proximity is undefined."""


class UndefinedConfidenceError(SpamNetError, ValueError):
    pass


class DegenerateNetworkError(SpamNetError, ValueError):
    pass


class EmptyTableError(SpamNetError, ValueError):
    """Negative sampling requested on a network without positive edges."""


class DivergenceError(SpamNetError, ArithmeticError):
    def __init__(self, epoch, message="non-finite or exploding embeddings"):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


class UndefinedScoreError(SpamNetError, ValueError):
    pass


class UndefinedMetricError(SpamNetError, ValueError):
    pass


class StageOrderError(SpamNetError, FileNotFoundError):
    """A pipeline stage ran before the artifacts it reads were produced."""
