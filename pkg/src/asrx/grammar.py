"""Parser and serializer for ASR+X target strings.

Every task target starts with the transcript and then carries the task
payload in the same string::

    ASR    播放小梦想大梦想
    SRWT   <0.21>父<0.47> <0.46>母<0.60>
    SER    你一个享受者你有什么跟这个复仇者去叫板呢<ANGER>
    SSR    ...吞进肚子里<童话故事>
    STTC   我感觉不太满意<开始回答>抱歉，我们会让你满意的。
"""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Context, Decimal
from typing import Optional, Sequence

from .errors import InvalidLabel, ParseError, WrongTask
from .text import join_tokens, strip_ws


class TaskKind(str, enum.Enum):
    ASR = "ASR"
    SRWT = "SRWT"
    VED = "VED"
    SER = "SER"
    SSR = "SSR"
    SGC = "SGC"
    SAP = "SAP"
    STTC = "STTC"

    @classmethod
    def coerce(cls, value: "TaskKind | str") -> "TaskKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ValueError(f"unknown task {value!r}") from None

    @property
    def has_tag(self) -> bool:
        return self in TAG_TASKS


VOCAB: dict[TaskKind, tuple[str, ...]] = {
    TaskKind.VED: ("laugh", "cough", "cry", "screaming", "sigh", "throat clearing", "sneeze", "other"),
    TaskKind.SER: ("sad", "anger", "neutral", "happy", "surprise", "fear", "disgust", "other"),
    TaskKind.SSR: ("新闻科普", "恐怖故事", "童话故事", "客服", "诗歌散文", "有声书", "日常口语", "其他"),
    TaskKind.SGC: ("female", "male"),
    TaskKind.SAP: ("child", "adult", "old"),
}
TAG_TASKS = frozenset(VOCAB)

CHAT_SEPARATOR = "<开始回答>"

# lookup key (stripped, lower-cased tag text) -> canonical label
_TAG_LOOKUP = {task: {label.lower(): label for label in labels} for task, labels in VOCAB.items()}

_TIME_RE = re.compile(r"[0-9]+(?:\.[0-9]+)?")
_BRACKET_RE = re.compile(r"<([^<>]*)>")
_FORBIDDEN_TOKEN = re.compile(r"[<>\s]")
_CENT = Decimal("0.01")
_DECIMAL_CTX = Context(prec=400)


def vocab(task: TaskKind | str) -> tuple[str, ...]:
    task = TaskKind.coerce(task)
    if task not in VOCAB:
        raise WrongTask(f"{task.value} has no class vocabulary")
    return VOCAB[task]


def canonical_tag(task: TaskKind | str, tag: str) -> str | None:
    """Return the canonical label for ``tag`` (case-insensitive), or None if not in the vocabulary."""
    task = TaskKind.coerce(task)
    if task not in VOCAB:
        raise WrongTask(f"{task.value} has no class vocabulary")
    return _TAG_LOOKUP[task].get(tag.strip().lower())


def tag_surface(label: str) -> str:
    """Latin labels are written upper-case inside the brackets, Chinese ones verbatim."""
    return label.upper() if label.isascii() else label


@dataclass(frozen=True)
class TimedToken:
    token: str
    start: float
    end: float

    def __post_init__(self):
        if not isinstance(self.token, str) or not self.token or _FORBIDDEN_TOKEN.search(self.token):
            raise InvalidLabel(f"bad timed token text {self.token!r}")
        for t in (self.start, self.end):
            if not isinstance(t, (int, float)) or not math.isfinite(t) or t < 0:
                raise InvalidLabel(f"bad time {t!r} for token {self.token!r}")
        if self.start > self.end:
            raise InvalidLabel(f"start {self.start} > end {self.end} for token {self.token!r}")


@dataclass(frozen=True)
class AsrXLabel:
    """A parsed task target.

    Exactly one payload field is set, depending on ``task``: ``timed`` for
    SRWT, ``tag`` for the classification tasks, ``response`` for STTC, none
    for ASR. Build instances through the classmethods, which fill in the
    transcript for SRWT and canonicalize tags.
    """

    task: TaskKind
    transcript: str
    timed: Optional[tuple[TimedToken, ...]] = None
    tag: Optional[str] = None
    response: Optional[str] = None

    @classmethod
    def asr(cls, transcript: str) -> "AsrXLabel":
        return cls(TaskKind.ASR, transcript)

    @classmethod
    def timestamped(cls, tokens: Sequence[TimedToken]) -> "AsrXLabel":
        tokens = tuple(tokens)
        return cls(TaskKind.SRWT, join_tokens(t.token for t in tokens), timed=tokens)

    @classmethod
    def tagged(cls, task: TaskKind | str, transcript: str, tag: str) -> "AsrXLabel":
        task = TaskKind.coerce(task)
        label = canonical_tag(task, tag)
        if label is None:
            raise InvalidLabel(f"{tag!r} is not a {task.value} class")
        return cls(task, transcript, tag=label)

    @classmethod
    def chat(cls, transcript: str, response: str) -> "AsrXLabel":
        return cls(TaskKind.STTC, transcript, response=response)

    def validate(self) -> None:
        task = self.task
        if not isinstance(task, TaskKind):
            raise InvalidLabel(f"task must be a TaskKind, got {task!r}")
        if not isinstance(self.transcript, str):
            raise InvalidLabel("transcript must be text")
        want_timed = task is TaskKind.SRWT
        want_tag = task in TAG_TASKS
        want_resp = task is TaskKind.STTC
        if (self.timed is not None) != want_timed:
            raise InvalidLabel(f"{task.value}: timed payload {'missing' if want_timed else 'not allowed'}")
        if (self.tag is not None) != want_tag:
            raise InvalidLabel(f"{task.value}: tag payload {'missing' if want_tag else 'not allowed'}")
        if (self.response is not None) != want_resp:
            raise InvalidLabel(f"{task.value}: response payload {'missing' if want_resp else 'not allowed'}")
        if want_timed:
            for tok in self.timed:
                if not isinstance(tok, TimedToken):
                    raise InvalidLabel(f"expected TimedToken, got {tok!r}")
            joined = join_tokens(t.token for t in self.timed)
            if strip_ws(joined) != strip_ws(self.transcript):
                raise InvalidLabel("timed tokens do not reproduce the transcript")
        if want_tag and self.tag not in VOCAB[task]:
            raise InvalidLabel(f"{self.tag!r} is not a {task.value} class")
        if want_resp:
            if CHAT_SEPARATOR in self.transcript:
                raise InvalidLabel("STTC transcript must not contain the answer separator")
            if not isinstance(self.response, str):
                raise InvalidLabel("response must be text")


def format_time(seconds: float) -> str:
    """Two-decimal rendering, rounding the written decimal value half-to-even.

    ``1.005`` renders as ``1.00`` and ``1.015`` as ``1.02``.
    """
    d = Decimal(repr(float(seconds) + 0.0))
    return f"{d.quantize(_CENT, rounding=ROUND_HALF_EVEN, context=_DECIMAL_CTX):f}"


def serialize_timed_transcript(tokens: Sequence[TimedToken]) -> str:
    parts = []
    for tok in tokens:
        if not isinstance(tok, TimedToken):
            raise InvalidLabel(f"expected TimedToken, got {tok!r}")
        parts.append(f"<{format_time(tok.start)}>{tok.token}<{format_time(tok.end)}>")
    return " ".join(parts)


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8", "surrogatepass"))


def _read_time(text: str, pos: int) -> tuple[float, int]:
    """Parse ``<number>`` starting at ``pos``; return (value, position after '>')."""
    if pos >= len(text) or text[pos] != "<":
        raise ParseError("expected '<' opening a timestamp", _byte_offset(text, pos), text)
    close = text.find(">", pos + 1)
    if close < 0:
        raise ParseError("unbalanced bracket", _byte_offset(text, pos), text)
    body = text[pos + 1 : close]
    if "<" in body:
        raise ParseError("unbalanced bracket", _byte_offset(text, pos), text)
    if not _TIME_RE.fullmatch(body):
        raise ParseError(f"malformed timestamp {body!r}", _byte_offset(text, pos + 1), text)
    value = float(body)
    if not math.isfinite(value):
        raise ParseError(f"timestamp out of range {body!r}", _byte_offset(text, pos + 1), text)
    return value, close + 1


def parse_timed_transcript(text: str) -> list[TimedToken]:
    """Parse ``<S>tok<E>`` triples.

    Triples may be separated by any amount of whitespace, including none.
    Adjacent tokens may overlap in time, but start times must not go
    backwards and each token's start must not exceed its end.
    """
    tokens: list[TimedToken] = []
    pos, n = 0, len(text)
    prev_start = -1.0
    while True:
        while pos < n and text[pos].isspace():
            pos += 1
        if pos >= n:
            break
        triple_at = pos
        start, pos = _read_time(text, pos)
        tok_begin = pos
        while pos < n and text[pos] not in "<>" and not text[pos].isspace():
            pos += 1
        if pos == tok_begin:
            raise ParseError("empty token", _byte_offset(text, pos), text)
        token = text[tok_begin:pos]
        if pos >= n or text[pos] != "<":
            reason = "unbalanced bracket" if pos < n and text[pos] == ">" else "missing end timestamp"
            raise ParseError(reason, _byte_offset(text, pos), text)
        end, pos = _read_time(text, pos)
        if start > end:
            raise ParseError(f"start > end for token {token!r}", _byte_offset(text, triple_at), text)
        if start < prev_start:
            raise ParseError(f"start time of {token!r} goes backwards", _byte_offset(text, triple_at), text)
        prev_start = start
        tokens.append(TimedToken(token, start, end))
    return tokens


def serialize_label(label: AsrXLabel) -> str:
    label.validate()
    task = label.task
    if task is TaskKind.ASR:
        return label.transcript
    if task is TaskKind.SRWT:
        return serialize_timed_transcript(label.timed)
    if task is TaskKind.STTC:
        return label.transcript + CHAT_SEPARATOR + label.response
    return f"{label.transcript}<{tag_surface(label.tag)}>"


def parse_label(task: TaskKind | str, text: str, *, tolerant: bool = False) -> AsrXLabel:
    """Inverse of :func:`serialize_label`.

    With ``tolerant=True`` surrounding whitespace is ignored and class tags
    match case-insensitively.
    """
    task = TaskKind.coerce(task)
    if not isinstance(text, str):
        raise ParseError("label must be text", 0)
    if tolerant:
        text = text.strip()

    if task is TaskKind.ASR:
        return AsrXLabel.asr(text)

    if task is TaskKind.SRWT:
        return AsrXLabel.timestamped(parse_timed_transcript(text))

    if task is TaskKind.STTC:
        cut = text.find(CHAT_SEPARATOR)
        if cut < 0:
            raise ParseError("missing separator " + CHAT_SEPARATOR, _byte_offset(text, len(text)), text)
        transcript, response = text[:cut], text[cut + len(CHAT_SEPARATOR) :]
        if tolerant:
            transcript, response = transcript.strip(), response.strip()
        return AsrXLabel.chat(transcript, response)

    if not text.endswith(">"):
        raise ParseError("missing tag", _byte_offset(text, len(text)), text)
    open_at = text.rfind("<")
    if open_at < 0:
        raise ParseError("unbalanced bracket", _byte_offset(text, len(text) - 1), text)
    body = text[open_at + 1 : -1]
    label = canonical_tag(task, body) if tolerant else None
    if not tolerant:
        for cand in VOCAB[task]:
            if tag_surface(cand) == body:
                label = cand
                break
    if label is None:
        raise ParseError(f"unknown tag {body!r} for {task.value}", _byte_offset(text, open_at), text)
    transcript = text[:open_at]
    if tolerant:
        transcript = transcript.strip()
    return AsrXLabel(task, transcript, tag=label)


def extract_tag(task: TaskKind | str, model_output: str) -> tuple[str, str] | None:
    """Pull ``(transcript, tag)`` out of free-form model output.

    The last bracket group naming a class of ``task`` wins; everything
    before it is the transcript. Returns None when no class tag is present,
    which scoring counts as a wrong prediction.
    """
    task = TaskKind.coerce(task)
    if task not in TAG_TASKS:
        raise WrongTask(f"{task.value} has no tag payload")
    lookup = _TAG_LOOKUP[task]
    for m in reversed(list(_BRACKET_RE.finditer(model_output))):
        label = lookup.get(m.group(1).strip().lower())
        if label is not None:
            return model_output[: m.start()].strip(), label
    return None
