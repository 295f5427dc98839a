"""
Error hierarchy for the packing app.

Every error carries a machine-readable ``category`` and the process exit code
the management commands return for it.
"""


class PackingError(Exception):
    category = "packing"
    exit_code = 1

    def __init__(self, message, **context):
        super().__init__(message)
        self.message = message
        self.context = context

    def __str__(self):
        return self.message


class ConfigurationError(PackingError):
    """Invalid settings, config file or command options."""
    category = "config"
    exit_code = 3


class LabelError(PackingError):
    """A class label is empty after normalization or contains a comma."""
    category = "label"
    exit_code = 4


class CorpusError(PackingError):
    """A survey sequence is unusable; ``participant`` names it."""
    category = "corpus"
    exit_code = 5

    @property
    def participant(self):
        return self.context.get("participant")


class ModelBuildError(PackingError):
    """The preference matrix cannot be built from the given corpus."""
    category = "model_build"
    exit_code = 6


class MatrixFormatError(PackingError):
    """A matrix document violates the schema; ``path`` points at the entry."""
    category = "matrix_format"
    exit_code = 7

    @property
    def path(self):
        return self.context.get("path")


class ScoringError(PackingError):
    """A sequence cannot be scored against the matrix."""
    category = "scoring"
    exit_code = 8

    @property
    def label(self):
        return self.context.get("label")


class AggregationError(PackingError):
    """Averaging over an empty score list."""
    category = "aggregation"
    exit_code = 9


class CapacityError(PackingError):
    """Too many items for exhaustive ordering."""
    category = "capacity"
    exit_code = 10


class TemplateError(PackingError):
    """Unbound placeholder or empty rendered message."""
    category = "template"
    exit_code = 11


class EmptyDetectionError(PackingError):
    """Nothing usable was left after parsing a perception response."""
    category = "empty_detection"
    exit_code = 12


class ValidationExhaustedError(PackingError):
    """Every planning attempt failed the detected-item match check."""
    category = "validation_exhausted"
    exit_code = 13

    @property
    def last_response(self):
        return self.context.get("last_response")

    @property
    def attempts(self):
        return self.context.get("attempts")


class ProviderError(PackingError):
    """Malformed provider response or unusable provider setup."""
    category = "provider"
    exit_code = 14


class ProviderTransportError(ProviderError):
    """Timeout or connection failure; retryable."""
    category = "provider_transport"
    exit_code = 15

    @property
    def attempts(self):
        return self.context.get("attempts")


class ProviderHTTPError(ProviderError):
    """Endpoint answered with a 4xx status; not retried."""
    category = "provider_http"
    exit_code = 16

    @property
    def status_code(self):
        return self.context.get("status_code")


class FixtureExhaustedError(ProviderError):
    """No mock fixture left for the request."""
    category = "fixture_exhausted"
    exit_code = 17


class DatasetError(PackingError):
    """Scene, survey, alias or lexicon file problem, with file context."""
    category = "dataset"
    exit_code = 18


class EvaluationError(PackingError):
    """Metrics cannot be computed or the report cannot be assembled."""
    category = "evaluation"
    exit_code = 19


def _all_subclasses(cls):
    for sub in cls.__subclasses__():
        yield sub
        yield from _all_subclasses(sub)


def exit_code_table():
    """(exit code, category, description) for every error class, sorted by code."""
    rows = [(PackingError.exit_code, PackingError.category, "unexpected packing error")]
    for cls in _all_subclasses(PackingError):
        doc = (cls.__doc__ or cls.__name__).strip().splitlines()[0]
        rows.append((cls.exit_code, cls.category, doc))
    return sorted(rows)
