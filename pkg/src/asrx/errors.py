"""Exception hierarchy shared across the toolkit."""
from __future__ import annotations


class AsrxError(Exception):
    """Base class for all toolkit errors."""


class InvalidLabel(AsrxError, ValueError):
    pass


class ParseError(AsrxError, ValueError):
    """Raised when a label string does not follow the ASR+X grammar.

    ``offset`` is the UTF-8 byte offset into the input where parsing failed.
    """

    def __init__(self, reason: str, offset: int = 0, text: str | None = None):
        self.reason = reason
        self.offset = offset
        self.text = text
        super().__init__(f"{reason} (at byte {offset})")


class WrongTask(AsrxError, ValueError):
    pass


class EmptyReference(AsrxError, ValueError):
    pass


class NoAlignedPairs(AsrxError, ValueError):
    pass


class UnknownRefLabel(AsrxError, ValueError):
    pass


class SchemaError(AsrxError, ValueError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = f"{path or '<manifest>'}:{line}: " if line is not None else ""
        super().__init__(where + message)


class InvalidRecord(AsrxError, ValueError):
    pass


class EmptySource(AsrxError, ValueError):
    pass


class MissingTag(AsrxError, ValueError):
    pass


class UnsupportedFormat(AsrxError, ValueError):
    pass


class InvalidClass(AsrxError, ValueError):
    pass


class EmptyClip(AsrxError, ValueError):
    pass


class SilentNoise(AsrxError, ValueError):
    pass


class TaskMismatch(AsrxError, ValueError):
    pass


class NoOverlap(AsrxError, ValueError):
    pass


class JudgeUnreachable(AsrxError, RuntimeError):
    pass


class UnparseableVerdict(AsrxError, ValueError):
    def __init__(self, reply: str):
        self.reply = reply
        super().__init__(f"no integer in 1..10 in judge reply: {reply[:80]!r}")
