"""Exception hierarchy.

Every error raised by the package derives from :class:`FlashCrashError`.
The three intermediate classes map onto CLI exit codes (config 2, parse 3,
computation 4).
"""

from __future__ import annotations


class FlashCrashError(Exception):
    exit_code = 4


class ConfigError(FlashCrashError, ValueError):
    exit_code = 2


class ParseError(FlashCrashError, ValueError):
    """A record or file that does not follow the documented grammar.

    ``lineno`` is 1-based and ``source`` names the file when known.
    """

    exit_code = 3

    def __init__(self, message: str, lineno: int | None = None, source: str | None = None):
        self.message = message
        self.lineno = lineno
        self.source = source
        super().__init__(self._render())

    def _render(self) -> str:
        where = []
        if self.source:
            where.append(str(self.source))
        if self.lineno is not None:
            where.append(f"line {self.lineno}")
        return f"{':'.join(where)}: {self.message}" if where else self.message

    def located(self, lineno: int | None = None, source: str | None = None) -> "ParseError":
        if lineno is not None:
            self.lineno = lineno
        if source is not None:
            self.source = source
        self.args = (self._render(),)
        return self


class ComputationError(FlashCrashError, ArithmeticError):
    exit_code = 4


# lobster-io
class MalformedLine(ParseError):
    pass


class InvalidEventType(ParseError):
    pass


class InvalidDirection(ParseError):
    pass


class NonPositiveSize(ParseError):
    pass


class NonPositivePrice(ParseError):
    pass


class NonMonotoneTime(ParseError):
    pass


class CrossedBook(ParseError):
    pass


class UnalignedInputs(ParseError):
    pass


# bars
class EventOutsideSession(ParseError):
    pass


# jumpdetect
class WindowTooShort(ComputationError):
    pass


class DomainError(ComputationError, ValueError):
    pass


class InsufficientData(ComputationError):
    pass


# tailfit
class EmptyInput(ComputationError, ValueError):
    pass


class InsufficientTail(ComputationError):
    pass


class DegenerateTail(ComputationError):
    pass


class JoinMismatch(ComputationError):
    pass


# synth
class LedgerIncomplete(ComputationError):
    pass
