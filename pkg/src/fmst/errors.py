"""Exception hierarchy and source spans shared by every module."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Span:
    """A region of source text, 1-based lines and columns."""

    line: int
    column: int
    end_line: int
    end_column: int
    path: str | None = None

    def __str__(self) -> str:
        where = f"{self.path}:" if self.path else ""
        return f"{where}{self.line}:{self.column}"


class FmstError(Exception):
    """Base class. ``kind`` is the stable machine-readable error name."""

    kind = "Error"

    def __init__(self, message: str, span: Span | None = None):
        super().__init__(message)
        self.message = message
        self.span = span

    def __str__(self) -> str:
        loc = f"{self.span}: " if self.span else ""
        return f"{loc}{self.kind}: {self.message}"


# parsing and validation


class ParseError(FmstError):
    kind = "SyntaxError"


class UnknownTypeName(FmstError):
    kind = "UnknownTypeName"


class UnguardedRecursion(FmstError):
    kind = "UnguardedRecursion"


class DuplicateTag(FmstError):
    kind = "DuplicateTag"


class DuplicateDefinition(FmstError):
    kind = "DuplicateDefinition"


class DuplicateRole(FmstError):
    kind = "DuplicateRole"


class DuplicateName(FmstError):
    """Repeated parameter or type name."""

    kind = "DuplicateName"


class UnknownDefinition(FmstError):
    kind = "UnknownDefinition"


class ScopeError(FmstError):
    """Free names escaping their binder, or an endpoint used by the wrong participant."""

    kind = "ScopeError"


# analyses


class PreconditionViolated(FmstError):
    kind = "PreconditionViolated"


class StateCapExceeded(FmstError):
    kind = "StateCapExceeded"

    def __init__(self, cap: int):
        super().__init__(f"state space exceeds the cap of {cap} states")
        self.cap = cap


# typing


class TypingError(FmstError):
    kind = "TypingError"


class LinearityViolation(TypingError):
    kind = "LinearityViolation"


class ContextMismatch(TypingError):
    kind = "ContextMismatch"


class BranchMismatch(TypingError):
    kind = "BranchMismatch"


class IncoherentSession(TypingError):
    kind = "IncoherentSession"


class NotASubtype(TypingError):
    kind = "NotASubtype"


class ArityMismatch(TypingError):
    kind = "ArityMismatch"


class MissingAnnotation(TypingError):
    kind = "MissingAnnotation"


class NoFiniteDerivation(TypingError):
    kind = "NoFiniteDerivation"


class InfiniteRank(TypingError):
    kind = "InfiniteRank"


class RankTooSmall(TypingError):
    kind = "RankTooSmall"


class DependsOnIllTyped(TypingError):
    kind = "DependsOnIllTyped"


class NotTyped(FmstError):
    kind = "NotTyped"


class InternalStuck(FmstError):
    kind = "InternalStuck"
