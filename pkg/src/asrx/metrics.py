"""Error rates (WER/CER/MER), timestamp alignment score and classification accuracy."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, NamedTuple, Sequence

import numpy as np

from .errors import EmptyReference, NoAlignedPairs, UnknownRefLabel
from .grammar import TimedToken
from .text import graphemes, is_cjk, normalize, strip_ws

MATCH, SUB, DEL, INS = "match", "sub", "del", "ins"


class AlignOp(NamedTuple):
    kind: str
    ref_idx: int | None
    hyp_idx: int | None


@dataclass(frozen=True)
class EditAlignment:
    ops: tuple[AlignOp, ...]
    cost: int

    def count(self, kind: str) -> int:
        return sum(1 for op in self.ops if op.kind == kind)

    @property
    def pairs(self) -> list[tuple[int, int]]:
        """(ref_idx, hyp_idx) for every match or substitution."""
        return [(op.ref_idx, op.hyp_idx) for op in self.ops if op.kind in (MATCH, SUB)]


def _distance_table(ref: Sequence[Hashable], hyp: Sequence[Hashable]) -> list[list[int]]:
    m = len(hyp)
    rows = [list(range(m + 1))]
    prev = rows[0]
    for i, r in enumerate(ref, 1):
        cur = [i] * (m + 1)
        for j in range(1, m + 1):
            diag = prev[j - 1] + (r != hyp[j - 1])
            up = prev[j] + 1
            left = cur[j - 1] + 1
            cur[j] = diag if diag <= up and diag <= left else (up if up <= left else left)
        rows.append(cur)
        prev = cur
    return rows


def edit_alignment(ref: Sequence[Hashable], hyp: Sequence[Hashable]) -> EditAlignment:
    """Minimum-cost Levenshtein alignment with unit costs.

    Backtrace ties are broken Match > Sub > Del > Ins, walking from the end,
    so the result is fully deterministic.
    """
    table = _distance_table(ref, hyp)
    i, j = len(ref), len(hyp)
    ops: list[AlignOp] = []
    while i or j:
        here = table[i][j]
        if i and j:
            diag = table[i - 1][j - 1]
            if ref[i - 1] == hyp[j - 1] and here == diag:
                ops.append(AlignOp(MATCH, i - 1, j - 1))
                i, j = i - 1, j - 1
                continue
            if here == diag + 1 and ref[i - 1] != hyp[j - 1]:
                ops.append(AlignOp(SUB, i - 1, j - 1))
                i, j = i - 1, j - 1
                continue
        if i and here == table[i - 1][j] + 1:
            ops.append(AlignOp(DEL, i - 1, None))
            i -= 1
        else:
            ops.append(AlignOp(INS, None, j - 1))
            j -= 1
    ops.reverse()
    return EditAlignment(tuple(ops), table[-1][-1])


@dataclass(frozen=True)
class ErrorRate:
    substitutions: int
    deletions: int
    insertions: int
    ref_len: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def hits(self) -> int:
        return self.ref_len - self.substitutions - self.deletions

    @property
    def rate(self) -> float:
        return self.errors / self.ref_len if self.ref_len else math.nan

    def __add__(self, other: "ErrorRate") -> "ErrorRate":
        return ErrorRate(
            self.substitutions + other.substitutions,
            self.deletions + other.deletions,
            self.insertions + other.insertions,
            self.ref_len + other.ref_len,
        )

    @classmethod
    def zero(cls) -> "ErrorRate":
        return cls(0, 0, 0, 0)


def token_error_rate(ref_tokens: Sequence[Hashable], hyp_tokens: Sequence[Hashable]) -> ErrorRate:
    if not ref_tokens:
        raise EmptyReference("reference is empty after normalization")
    al = edit_alignment(ref_tokens, hyp_tokens)
    s = d = ins = 0
    for op in al.ops:
        if op.kind == SUB:
            s += 1
        elif op.kind == DEL:
            d += 1
        elif op.kind == INS:
            ins += 1
    return ErrorRate(s, d, ins, len(ref_tokens))


def cer_tokens(text: str, *, fold_width: bool = True) -> list[str]:
    return graphemes(strip_ws(normalize(text, width=fold_width)))


def wer_tokens(text: str, *, fold_width: bool = True) -> list[str]:
    return normalize(text, width=fold_width).split()


def tokenize_mixed(text: str, *, fold_width: bool = True) -> list[str]:
    """Code-switching tokens: one per CJK character, one per run of other letters/digits.

    Punctuation and whitespace separate tokens and are dropped.
    """
    text = normalize(text, width=fold_width)
    tokens: list[str] = []
    run: list[str] = []
    for ch in text:
        if is_cjk(ch):
            if run:
                tokens.append("".join(run))
                run = []
            tokens.append(ch)
        elif ch.isalnum():
            run.append(ch)
        elif run:
            tokens.append("".join(run))
            run = []
    if run:
        tokens.append("".join(run))
    return tokens


def cer(ref: str, hyp: str, *, fold_width: bool = True) -> ErrorRate:
    return token_error_rate(cer_tokens(ref, fold_width=fold_width), cer_tokens(hyp, fold_width=fold_width))


def wer(ref: str, hyp: str, *, fold_width: bool = True) -> ErrorRate:
    return token_error_rate(wer_tokens(ref, fold_width=fold_width), wer_tokens(hyp, fold_width=fold_width))


def mer(ref: str, hyp: str, *, fold_width: bool = True) -> ErrorRate:
    return token_error_rate(tokenize_mixed(ref, fold_width=fold_width), tokenize_mixed(hyp, fold_width=fold_width))


@dataclass(frozen=True)
class AasResult:
    mean_shift_ms: float
    aligned_pairs: int
    unaligned_ref: int
    unaligned_hyp: int
    total_shift_ms: float = 0.0

    def __add__(self, other: "AasResult") -> "AasResult":
        pairs = self.aligned_pairs + other.aligned_pairs
        total = self.total_shift_ms + other.total_shift_ms
        return AasResult(
            total / pairs if pairs else 0.0,
            pairs,
            self.unaligned_ref + other.unaligned_ref,
            self.unaligned_hyp + other.unaligned_hyp,
            total,
        )


def aas(ref: Sequence[TimedToken], hyp: Sequence[TimedToken], *, unit_scale: float = 1000.0) -> AasResult:
    """Average boundary shift between text-aligned reference and hypothesis tokens.

    Tokens are paired through :func:`edit_alignment` on their text. Each
    matched or substituted pair contributes ``(|Δstart| + |Δend|) / 2``;
    inserted and deleted tokens are only counted. ``unit_scale`` converts
    seconds into the reporting unit (milliseconds by default).
    """
    al = edit_alignment([t.token for t in ref], [t.token for t in hyp])
    shifts = []
    for ri, hi in al.pairs:
        r, h = ref[ri], hyp[hi]
        shifts.append((abs(r.start - h.start) + abs(r.end - h.end)) / 2 * unit_scale)
    if not shifts:
        raise NoAlignedPairs("no token of the hypothesis aligns with the reference")
    total = math.fsum(shifts)
    return AasResult(
        mean_shift_ms=total / len(shifts),
        aligned_pairs=len(shifts),
        unaligned_ref=al.count(DEL),
        unaligned_hyp=al.count(INS),
        total_shift_ms=total,
    )


@dataclass
class ConfusionMatrix:
    """Counts indexed ``counts[ref_idx, hyp_idx]`` over ``labels``.

    Unparseable predictions are kept per reference class in ``unparseable``;
    they count toward the total but never toward the diagonal.
    """

    labels: tuple[str, ...]
    counts: np.ndarray
    unparseable: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.unparseable is None:
            self.unparseable = np.zeros(len(self.labels), dtype=np.int64)

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1) + self.unparseable

    @property
    def total(self) -> int:
        return int(self.row_totals.sum())

    @property
    def correct(self) -> int:
        return int(np.trace(self.counts))

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else math.nan

    @property
    def unparseable_count(self) -> int:
        return int(self.unparseable.sum())

    def per_class_accuracy(self) -> dict[str, float]:
        rows = self.row_totals
        return {
            label: (int(self.counts[i, i]) / int(rows[i]) if rows[i] else math.nan)
            for i, label in enumerate(self.labels)
        }

    def count(self, ref: str, hyp: str) -> int:
        return int(self.counts[self.labels.index(ref), self.labels.index(hyp)])


def classification_accuracy(
    pairs: Iterable[tuple[str, object]], labels: Sequence[str]
) -> ConfusionMatrix:
    """Build a confusion matrix from ``(ref_tag, prediction)`` pairs.

    ``prediction`` is a class string, an ``extract_tag`` result tuple, or
    None for unparseable output. Predictions outside ``labels`` are counted
    as unparseable.
    """
    labels = tuple(labels)
    index = {label: i for i, label in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    unparseable = np.zeros(len(labels), dtype=np.int64)
    for ref, pred in pairs:
        if ref not in index:
            raise UnknownRefLabel(f"reference label {ref!r} not in {labels}")
        if isinstance(pred, tuple):
            pred = pred[1]
        hi = index.get(pred) if pred is not None else None
        if hi is None:
            unparseable[index[ref]] += 1
        else:
            counts[index[ref], hi] += 1
    return ConfusionMatrix(labels, counts, unparseable)
