"""Exception hierarchy shared by every netmatch module."""


class NetmatchError(Exception):
    """Base class for all package errors."""


class DomainError(NetmatchError, ValueError):
    """An argument lies outside the domain of a function."""


class ValidationError(NetmatchError, ValueError):
    """Input data violate a structural invariant (symmetry, binarity, ids...)."""


class ConfigError(NetmatchError, ValueError):
    """Invalid configuration or design parameters."""


class PreconditionError(NetmatchError, ValueError):
    """An operation was called on data that lack something it needs."""


class DegenerateMatchingError(NetmatchError):
    """No matched discordant pair carries positive kernel weight."""
