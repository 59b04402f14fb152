"""Exception hierarchy.

All errors derive from :class:`MolcommError`; the ``ValueError`` mix-ins let
callers that only know about built-in exceptions still catch them.
"""


class MolcommError(Exception):
    """Base class for errors raised by this package."""


class ParameterError(MolcommError, ValueError):
    """A physical or numerical parameter violates its invariants."""


class ContractError(MolcommError, ValueError):
    """Arguments are individually valid but inconsistent (e.g. length mismatch)."""


class ConfigurationError(MolcommError, ValueError):
    """A simulation configuration cannot be run as given."""


class ConstructionError(MolcommError, RuntimeError):
    """Code construction failed within its retry budget."""
