"""Character classes and normalization helpers shared by the grammar and the metrics."""
from __future__ import annotations

import re

import regex

# CJK ideographs, kana, hangul syllables, and compatibility ideographs.
_CJK_RANGES = (
    (0x3040, 0x30FF),
    (0x3400, 0x4DBF),
    (0x4E00, 0x9FFF),
    (0xAC00, 0xD7AF),
    (0xF900, 0xFAFF),
    (0x20000, 0x2A6DF),
    (0x2A700, 0x2EBEF),
    (0x30000, 0x3134F),
)

_GRAPHEME = regex.compile(r"\X")
_WS = re.compile(r"\s+")


def is_cjk(ch: str) -> bool:
    cp = ord(ch)
    for lo, hi in _CJK_RANGES:
        if lo <= cp <= hi:
            return True
    return False


def join_tokens(tokens) -> str:
    """Rebuild running text from word/character tokens.

    A space goes between two neighbours only when neither side of the
    boundary is a CJK character, so ``[父, 母]`` gives ``父母`` and
    ``[hello, world]`` gives ``hello world``.
    """
    out: list[str] = []
    prev = ""
    for tok in tokens:
        if prev and not is_cjk(prev[-1]) and not is_cjk(tok[0]):
            out.append(" ")
        out.append(tok)
        prev = tok
    return "".join(out)


def fold_width(text: str) -> str:
    """Map full-width ASCII forms (U+FF01..U+FF5E) and the ideographic space to half-width."""
    chars = []
    for ch in text:
        cp = ord(ch)
        if 0xFF01 <= cp <= 0xFF5E:
            chars.append(chr(cp - 0xFEE0))
        elif cp == 0x3000:
            chars.append(" ")
        else:
            chars.append(ch)
    return "".join(chars)


def normalize(text: str, *, width: bool = True) -> str:
    """Scoring normalization: optional width folding, lower-casing, whitespace collapse."""
    if width:
        text = fold_width(text)
    return _WS.sub(" ", text.lower()).strip()


def graphemes(text: str) -> list[str]:
    return _GRAPHEME.findall(text)


def strip_ws(text: str) -> str:
    return _WS.sub("", text)
