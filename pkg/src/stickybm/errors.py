"""Exception hierarchy shared by the library and the command line."""


class StickyError(Exception):
    """Base class for all errors raised by :mod:`stickybm`."""


class DomainError(StickyError, ValueError):
    """An argument lies outside the domain of a kernel function."""


class ArgumentError(StickyError, ValueError):
    """A caller-supplied option is inconsistent (missing rho, bad test function, ...)."""


class ConfigError(StickyError, ValueError):
    """A simulation or run configuration failed validation."""


class ModelError(StickyError, ValueError):
    """Model coefficients are invalid where they are evaluated (e.g. sigma <= 0)."""


class ValidationError(StickyError, ValueError):
    """A sample path violates its structural invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        head = "; ".join(str(v) for v in self.violations[:5])
        more = "" if len(self.violations) <= 5 else f" (+{len(self.violations) - 5} more)"
        super().__init__(f"invalid sample path: {head}{more}")


class NumericError(StickyError, ArithmeticError):
    """A numerical procedure did not reach its target accuracy."""

    def __init__(self, message, *, values=None, achieved=None):
        self.values = values
        self.achieved = achieved
        super().__init__(message)
