"""
Exceptions raised by the tripling library.

Every error derives from a builtin type as well, so callers may catch
ValueError/RuntimeError without importing this module.
"""


class TriplingError(Exception):
    pass


class ParameterError(TriplingError, ValueError):
    """Input outside the domain of an operation."""
    pass


class NumericalError(TriplingError, RuntimeError):
    """A solver, quadrature or integrator did not deliver a trustworthy result."""
    pass


class ConfigError(TriplingError, ValueError):
    """
    Invalid run configuration.

    :param code: one of UNKNOWN_KEY, RANGE, MISSING, PARSE
    """
    UNKNOWN_KEY = 'unknown_key'
    RANGE = 'range'
    MISSING = 'missing'
    PARSE = 'parse'

    def __init__(self, code: str, message: str):
        super().__init__(f"[{code}] {message}")
        self.code = code
