"""Independent reference computations used to freeze and cross-check expected values.

Nothing here imports the package under test.
"""
from __future__ import annotations

import re
from fractions import Fraction


def naive_edit_distance(a, b) -> int:
    """Plain recursive Levenshtein distance (exponential time)."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    if a[0] == b[0]:
        return naive_edit_distance(a[1:], b[1:])
    return 1 + min(
        naive_edit_distance(a[1:], b),
        naive_edit_distance(a, b[1:]),
        naive_edit_distance(a[1:], b[1:]),
    )


def all_alignments(n: int, m: int):
    """Enumerate every alignment of an n-token reference with an m-token hypothesis.

    Each alignment is a tuple of steps: 'D' (consume ref), 'I' (consume hyp)
    or 'P' (pair one ref with one hyp).
    """
    if n == 0 and m == 0:
        yield ()
        return
    if n:
        for rest in all_alignments(n - 1, m):
            yield ("D",) + rest
    if m:
        for rest in all_alignments(n, m - 1):
            yield ("I",) + rest
    if n and m:
        for rest in all_alignments(n - 1, m - 1):
            yield ("P",) + rest


def alignment_cost(steps, a, b) -> tuple[int, int, int, int]:
    """(cost, subs, dels, ins) of one enumerated alignment."""
    i = j = s = d = ins = 0
    for st in steps:
        if st == "D":
            d += 1
            i += 1
        elif st == "I":
            ins += 1
            j += 1
        else:
            s += a[i] != b[j]
            i += 1
            j += 1
    return s + d + ins, s, d, ins


def exhaustive_best(a, b):
    """Minimum cost over all alignments plus every optimal (subs, dels, ins) split."""
    best = None
    splits = set()
    for steps in all_alignments(len(a), len(b)):
        cost, s, d, ins = alignment_cost(steps, a, b)
        if best is None or cost < best:
            best, splits = cost, {(s, d, ins)}
        elif cost == best:
            splits.add((s, d, ins))
    return best, splits


def round_half_even_2dp(x: float) -> str:
    """Round the shortest decimal spelling of ``x`` to hundredths, ties to even, using exact fractions."""
    v = Fraction(repr(x)) * 100
    floor = v.numerator // v.denominator
    rem = v - floor
    if rem > Fraction(1, 2) or (rem == Fraction(1, 2) and floor % 2 == 1):
        floor += 1
    return f"{floor // 100}.{floor % 100:02d}"


_CJK = r"぀-ヿ㐀-䶿一-鿿가-힯豈-﫿"
_MIXED = re.compile(rf"[{_CJK}]|[a-z0-9]+")


def mixed_tokens_ascii(text: str):
    """Character-class scan for code-switched text restricted to ASCII Latin."""
    return _MIXED.findall(text.lower())


def last_tag_scan(text: str, vocab_upper: set[str]):
    """Exhaustive scan: try every '<' position from the right, accept the first vocab tag."""
    for start in range(len(text) - 1, -1, -1):
        if text[start] != "<":
            continue
        end = text.find(">", start + 1)
        if end < 0:
            continue
        body = text[start + 1 : end]
        if "<" in body:
            continue
        if body.strip().upper() in vocab_upper:
            return text[:start].strip(), body.strip().lower()
    return None
