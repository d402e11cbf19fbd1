"""Shared exception types."""


class KernbenchError(Exception):
    """Base class for all framework errors."""


class UnknownKernelError(KernbenchError):
    """A kernel name is not present in the signature registry."""


class ArgumentError(KernbenchError):
    """A call's arguments do not match its signature (kind, count, or value)."""


class CapacityError(KernbenchError):
    """A data region is too small for the shape derived for it."""


class NumericalFailure(KernbenchError):
    """A kernel hit a numerical breakdown (e.g. an exactly singular pivot)."""


class StreamError(KernbenchError):
    """A sampler command stream is malformed or violates ordering rules."""


class ExperimentError(KernbenchError):
    """An experiment file or object is invalid."""


class SubmitError(KernbenchError):
    """Experiment submission failed (missing sampler, nonzero exit, ...)."""


class ReportError(KernbenchError):
    """A report file cannot be parsed against its experiment."""
