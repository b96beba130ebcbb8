"""Score model outputs against a reference manifest and render result tables."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .corpus import UtteranceRecord
from .errors import EmptyReference, NoAlignedPairs, NoOverlap, ParseError
from .grammar import CHAT_SEPARATOR, TAG_TASKS, VOCAB, TaskKind, extract_tag, parse_timed_transcript
from .metrics import AasResult, ConfusionMatrix, ErrorRate, aas, cer, classification_accuracy, mer, token_error_rate, wer
from .text import graphemes, normalize

LANGUAGE_METRIC = {"CN": "CER", "EN": "WER", "mixed": "MER"}
_RATE_FN = {"CER": cer, "WER": wer, "MER": mer}

_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESCAPES = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}


def escape_field(text: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in text)


def unescape_field(text: str) -> str:
    out = []
    it = iter(text)
    for ch in it:
        if ch == "\\":
            nxt = next(it, "")
            out.append(_UNESCAPES.get(nxt, "\\" + nxt))
        else:
            out.append(ch)
    return "".join(out)


def read_hypotheses(path: str | Path) -> dict[str, str]:
    """Two-column ``id<TAB>output`` file with ``\\t``, ``\\n``, ``\\r`` and ``\\\\`` escaped."""
    hyps: dict[str, str] = {}
    with open(path, "r", encoding="utf-8", newline="") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            key, sep, value = line.partition("\t")
            if not sep:
                # an id with an empty output
                value = ""
            hyps[key] = unescape_field(value)
    return hyps


def write_hypotheses(hyps: Mapping[str, str], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for key, value in hyps.items():
            f.write(f"{key}\t{escape_field(value)}\n")


@dataclass
class ScoreReport:
    task: TaskKind
    metric: str
    value: float
    item_count: int
    error_rates: dict[str, ErrorRate] = field(default_factory=dict)
    aas: Optional[AasResult] = None
    confusion: Optional[ConfusionMatrix] = None
    unparseable: int = 0
    missing_ids: list[str] = field(default_factory=list)
    extra_ids: list[str] = field(default_factory=list)

    @property
    def per_class(self) -> dict[str, float]:
        return self.confusion.per_class_accuracy() if self.confusion is not None else {}

    def summary(self) -> dict:
        d = {
            "task": self.task.value,
            "metric": self.metric,
            "value": self.value,
            "items": self.item_count,
            "unparseable": self.unparseable,
            "missing_ids": list(self.missing_ids),
            "extra_ids": list(self.extra_ids),
        }
        if self.error_rates:
            d["error_rates"] = {
                k: {"S": r.substitutions, "D": r.deletions, "I": r.insertions, "N": r.ref_len, "rate": r.rate}
                for k, r in self.error_rates.items()
            }
        if self.aas is not None:
            d["aas"] = {
                "mean_shift_ms": self.aas.mean_shift_ms,
                "aligned_pairs": self.aas.aligned_pairs,
                "unaligned_ref": self.aas.unaligned_ref,
                "unaligned_hyp": self.aas.unaligned_hyp,
            }
        if self.confusion is not None:
            c = self.confusion
            d["confusion"] = {
                "labels": list(c.labels),
                "counts": c.counts.tolist(),
                "unparseable": c.unparseable.tolist(),
            }
            d["per_class"] = self.per_class
        return d


def _rate_or_empty(fn, ref: str, hyp: str) -> Optional[ErrorRate]:
    try:
        return fn(ref, hyp)
    except EmptyReference:
        return None


def _score_asr(pairs) -> dict[str, ErrorRate]:
    totals: dict[str, ErrorRate] = {}
    for rec, hyp in pairs:
        name = LANGUAGE_METRIC[rec.language]
        r = _rate_or_empty(_RATE_FN[name], rec.transcript, hyp)
        if r is not None:
            totals[name] = totals.get(name, ErrorRate.zero()) + r
    return {m: totals[m] for m in ("CER", "WER", "MER") if m in totals}


def _asr_headline(rates: dict[str, ErrorRate]) -> tuple[str, float]:
    if not rates:
        return "CER", math.nan
    if len(rates) == 1:
        (name, r), = rates.items()
        return name, r.rate
    pooled = sum(rates.values(), ErrorRate.zero())
    return "/".join(rates), pooled.rate


def score_run(records: Sequence[UtteranceRecord], hyps: Mapping[str, str], task: TaskKind | str) -> ScoreReport:
    """Score hypotheses for one task.

    ASR uses CER, WER or MER according to each record's language. SRWT
    reports the alignment score plus CER over the token text. Tag tasks
    extract the last valid tag and report accuracy with a confusion matrix
    (and transcript CER). STTC reports transcript CER only; answers are
    scored separately by the judge.
    """
    task = TaskKind.coerce(task)
    records = [r for r in records if r.task is task]
    ref_ids = {r.id for r in records}
    pairs = [(r, hyps[r.id]) for r in records if r.id in hyps]
    if not pairs:
        raise NoOverlap(f"no hypothesis matches a {task.value} reference id")
    missing = [r.id for r in records if r.id not in hyps]
    extra = sorted(k for k in hyps if k not in ref_ids)
    report = ScoreReport(task, "", math.nan, len(pairs), missing_ids=missing, extra_ids=extra)

    if task is TaskKind.ASR:
        report.error_rates = _score_asr(pairs)
        report.metric, report.value = _asr_headline(report.error_rates)
        return report

    if task is TaskKind.SRWT:
        total_aas: Optional[AasResult] = None
        char_rate = ErrorRate.zero()
        for rec, hyp in pairs:
            try:
                hyp_tokens = parse_timed_transcript(hyp)
            except ParseError:
                report.unparseable += 1
                hyp_tokens = []
            ref_chars = [g for t in rec.timed for g in graphemes(normalize(t.token))]
            hyp_chars = [g for t in hyp_tokens for g in graphemes(normalize(t.token))]
            if ref_chars:
                char_rate = char_rate + token_error_rate(ref_chars, hyp_chars)
            try:
                a = aas(list(rec.timed), hyp_tokens)
            except NoAlignedPairs:
                a = AasResult(0.0, 0, len(rec.timed), len(hyp_tokens), 0.0)
            total_aas = a if total_aas is None else total_aas + a
        report.aas = total_aas
        report.error_rates = {"CER": char_rate}
        report.metric = "AAS"
        report.value = total_aas.mean_shift_ms if total_aas and total_aas.aligned_pairs else math.nan
        return report

    if task in TAG_TASKS:
        judged = []
        char_rate = ErrorRate.zero()
        for rec, hyp in pairs:
            found = extract_tag(task, hyp)
            if found is None:
                report.unparseable += 1
            judged.append((rec.tag, found))
            r = _rate_or_empty(cer, rec.transcript, found[0] if found else hyp)
            if r is not None:
                char_rate = char_rate + r
        report.confusion = classification_accuracy(judged, VOCAB[task])
        report.metric = "ACC"
        report.value = report.confusion.accuracy
        report.error_rates = {"CER": char_rate}
        return report

    # STTC
    char_rate = ErrorRate.zero()
    for rec, hyp in pairs:
        cut = hyp.find(CHAT_SEPARATOR)
        if cut < 0:
            report.unparseable += 1
        r = _rate_or_empty(cer, rec.transcript, hyp[:cut] if cut >= 0 else hyp)
        if r is not None:
            char_rate = char_rate + r
    report.error_rates = {"CER": char_rate}
    report.metric = "CER"
    report.value = char_rate.rate if char_rate.ref_len else math.nan
    return report


_PERCENT_METRICS = {"ACC", "CER", "WER", "MER"}


def _fmt(metric: str, value: float) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    if metric == "AAS" or metric == "JUDGE":
        return f"{value:.2f}"
    return f"{100.0 * value:.2f}"


def _unit(metric: str) -> str:
    return "ms" if metric == "AAS" else ("score" if metric == "JUDGE" else "%")


def report_rows(reports: Iterable[ScoreReport]) -> list[list[str]]:
    """Flatten reports into ``[task, metric, key, value, unit, items, unparseable]`` rows.

    Sections follow task order; inside a section the headline comes first,
    then error-rate components, then per-class accuracy.
    """
    order = {t: i for i, t in enumerate(TaskKind)}
    rows = []
    for rep in sorted(reports, key=lambda r: order[r.task]):
        t = rep.task.value
        rows.append([t, rep.metric, "all", _fmt(rep.metric, rep.value), _unit(rep.metric), str(rep.item_count), str(rep.unparseable)])
        for name, r in rep.error_rates.items():
            if rep.metric == name:
                continue
            rows.append([t, name, "transcript", _fmt(name, r.rate if r.ref_len else math.nan), "%", str(rep.item_count), ""])
        for label, acc in rep.per_class.items():
            rows.append([t, "ACC", label, _fmt("ACC", acc), "%", str(int(rep.confusion.row_totals[rep.confusion.labels.index(label)])), ""])
    return rows


_HEADER = ["task", "metric", "key", "value", "unit", "items", "unparseable"]


def render_report(reports: Sequence[ScoreReport]) -> tuple[str, str]:
    """Return ``(text_table, csv_text)``; percentages and milliseconds use two decimals."""
    rows = report_rows(reports)
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(_HEADER)]
    lines = []
    current = None
    for r in rows:
        if r[0] != current:
            if current is not None:
                lines.append("")
            current = r[0]
            lines.append(f"== {current} ==")
            lines.append("  ".join(h.ljust(w) for h, w in zip(_HEADER, widths)).rstrip())
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    text = "\n".join(lines) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_HEADER)
    w.writerows(rows)
    return text, buf.getvalue()
