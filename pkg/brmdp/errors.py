"""
Exceptions raised by the BR-MDP library.

Library code raises these; the command line interface catches
:class:`BRMDPError`, logs it and exits with a non-zero status.
"""


class BRMDPError(Exception):
    """Base class for every error raised by the library."""


class DomainError(BRMDPError, ValueError):
    """An argument lies outside the domain of an operation.

    Raised for inadmissible actions, observations outside a family's support,
    parameters outside the parameter space and empty risk inputs.
    """


class ImpossibleObservationError(DomainError):
    """Every atom of a posterior assigns zero likelihood to an observation."""


class ConfigurationError(BRMDPError, ValueError):
    """A configuration, budget or solver setting is invalid."""


class StateLimitError(ConfigurationError):
    """Exact enumeration exceeded the augmented-state cap."""


class ExportError(BRMDPError):
    """Result files could not be written."""
