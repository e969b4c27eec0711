"""Shared exception types."""


class GuardmcError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(GuardmcError):
    def __init__(self, msg, line=None, col=None):
        loc = "" if line is None else f" at line {line}" + ("" if col is None else f", col {col}")
        super().__init__(msg + loc)
        self.line = line
        self.col = col


class SemanticError(GuardmcError):
    """A parsed document violates a model invariant."""


class DisabledMoveError(GuardmcError):
    """step() was asked to fire a transition that is not enabled."""


class ResourceLimitError(GuardmcError):
    """A configurable node/time budget was exceeded."""


class UnsupportedTaskError(GuardmcError):
    """The requested parameterized task falls outside the supported table cells."""


class ConstructionError(GuardmcError):
    """A run transformation hit a case its construction does not cover."""
