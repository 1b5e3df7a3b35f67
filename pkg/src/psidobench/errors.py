"""Exception hierarchy shared by all modules."""


class PsidoError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(PsidoError, ValueError):
    """An argument is outside its admissible range."""


class SamplingError(PsidoError, ValueError):
    """A pointwise evaluator produced a non-finite value."""


class CatalogError(PsidoError, KeyError):
    """Unknown catalog identifier."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class CapabilityError(PsidoError):
    """A derivative order is beyond both exact and finite-difference support."""


class PathError(PsidoError, ValueError):
    """Operator application path incompatible with the symbol."""


class EvaluationError(PsidoError, ValueError):
    """A symbol returned a non-finite value during operator application."""


class NormUndefinedError(PsidoError):
    """A class norm was requested from a failed certificate."""


class ConvergenceError(PsidoError):
    """An iterative procedure hit its iteration cap."""


class PreconditionError(PsidoError):
    """A theorem hypothesis required by an experiment is not met."""


class DegenerateFamilyError(PsidoError):
    """Every member of a test family was skipped by the guard."""


class ConfigError(PsidoError, ValueError):
    """Malformed experiment configuration."""
