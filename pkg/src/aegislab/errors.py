"""Exception types shared across the toolkit."""


class AegislabError(Exception):
    """Base class for all toolkit errors."""


class ParseError(AegislabError):
    """A dataset file could not be parsed (bad field count, bad token)."""


class SchemaError(AegislabError):
    """Schema is invalid or does not match the data it is applied to."""


class SplitError(AegislabError):
    """A requested split cannot be produced (empty part, bad spec)."""


class MetricError(AegislabError):
    """A metric is undefined for the given inputs (e.g. no positive labels)."""


class TrainingError(AegislabError):
    """Model training failed (empty data, diverged loss)."""


class MimicryError(AegislabError):
    """A mimicry spec cannot be fitted or applied."""


class ConfigError(AegislabError):
    """An experiment config is missing fields or references bad paths."""
