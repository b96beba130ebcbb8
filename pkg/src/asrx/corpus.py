"""JSONL manifests, ASR+X training targets, multi-task mixing and class balancing.

Manifest rows are UTF-8 JSON objects, one per line::

    {"id": "utt001", "audio": "wav/utt001.wav", "duration": 3.2, "language": "CN",
     "task": "SER", "transcript": "...", "tag": "anger"}

``timed`` (SRWT) holds the timestamped transcript in label form
(``"<0.21>父<0.47> <0.46>母<0.60>"``), ``tag`` the lower-case class name for
the classification tasks, ``response`` the answer text for STTC.
"""
from __future__ import annotations

import bisect
import csv
import io
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

from .errors import EmptySource, InvalidLabel, InvalidRecord, MissingTag, ParseError, SchemaError, WrongTask
from .grammar import (
    TAG_TASKS,
    VOCAB,
    AsrXLabel,
    TaskKind,
    TimedToken,
    canonical_tag,
    parse_timed_transcript,
    serialize_label,
    serialize_timed_transcript,
)
from .seeding import keyed_rng
from .text import join_tokens, strip_ws

log = logging.getLogger(__name__)

LANGUAGES = ("CN", "EN", "mixed")
_LANG_LOOKUP = {lang.lower(): lang for lang in LANGUAGES}
PROMPTS_PER_TASK = 5


@dataclass(frozen=True)
class UtteranceRecord:
    id: str
    audio: str
    duration: float
    language: str
    task: TaskKind
    transcript: str
    timed: Optional[tuple[TimedToken, ...]] = None
    tag: Optional[str] = None
    response: Optional[str] = None

    def label(self) -> AsrXLabel:
        """The record's target as an :class:`AsrXLabel` (raises InvalidLabel if incomplete)."""
        label = AsrXLabel(
            self.task,
            self.transcript,
            timed=self.timed if self.task is TaskKind.SRWT else None,
            tag=self.tag if self.task in TAG_TASKS else None,
            response=self.response if self.task is TaskKind.STTC else None,
        )
        label.validate()
        return label

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "audio": self.audio,
            "duration": self.duration,
            "language": self.language,
            "task": self.task.value,
            "transcript": self.transcript,
        }
        if self.timed is not None:
            d["timed"] = serialize_timed_transcript(self.timed)
        if self.tag is not None:
            d["tag"] = self.tag
        if self.response is not None:
            d["response"] = self.response
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)


@dataclass(frozen=True)
class Violation:
    line: int
    id: Optional[str]
    field: str
    message: str

    def __str__(self) -> str:
        return f"line {self.line} [{self.id or '?'}] {self.field}: {self.message}"


@dataclass
class ValidationReport:
    path: str
    rows: int = 0
    valid: int = 0
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> dict:
        return {
            "path": self.path,
            "rows": self.rows,
            "valid": self.valid,
            "violations": [v.__dict__ for v in self.violations],
        }


def record_from_dict(obj: object) -> tuple[Optional[UtteranceRecord], list[tuple[str, str]]]:
    """Convert one decoded manifest row. Returns (record or None, [(field, problem), ...])."""
    problems: list[tuple[str, str]] = []
    if not isinstance(obj, dict):
        return None, [("row", "not a JSON object")]

    def text_field(name: str, required: bool = True) -> Optional[str]:
        v = obj.get(name)
        if v is None:
            if required:
                problems.append((name, "missing"))
            return None
        if not isinstance(v, str):
            problems.append((name, "must be a string"))
            return None
        return v

    rid = text_field("id")
    if rid == "":
        problems.append(("id", "empty"))
    audio = text_field("audio")
    transcript = text_field("transcript")

    duration = obj.get("duration")
    if isinstance(duration, bool) or not isinstance(duration, (int, float)):
        problems.append(("duration", "missing or not a number"))
        duration = None
    elif not math.isfinite(duration) or duration <= 0:
        problems.append(("duration", "must be > 0"))

    language = None
    lang_raw = text_field("language")
    if lang_raw is not None:
        language = _LANG_LOOKUP.get(lang_raw.lower())
        if language is None:
            problems.append(("language", f"{lang_raw!r} not one of {', '.join(LANGUAGES)}"))

    task = None
    task_raw = text_field("task")
    if task_raw is not None:
        try:
            task = TaskKind.coerce(task_raw)
        except ValueError:
            problems.append(("task", f"unknown task {task_raw!r}"))

    timed = None
    timed_raw = text_field("timed", required=False)
    if timed_raw is not None:
        try:
            timed = tuple(parse_timed_transcript(timed_raw))
        except ParseError as e:
            problems.append(("timed", f"unparseable timed transcript: {e}"))
    tag = None
    tag_raw = text_field("tag", required=False)
    response = text_field("response", required=False)

    if task is not None:
        if task is TaskKind.SRWT:
            if timed_raw is None:
                problems.append(("timed", f"required for {task.value}"))
            elif timed is not None and transcript is not None:
                if strip_ws(join_tokens(t.token for t in timed)) != strip_ws(transcript):
                    problems.append(("timed", "tokens do not reproduce the transcript"))
        if task in TAG_TASKS:
            if tag_raw is None:
                problems.append(("tag", f"required for {task.value}"))
            else:
                tag = canonical_tag(task, tag_raw)
                if tag is None:
                    problems.append(("tag", f"{tag_raw!r} is not a {task.value} class"))
        if task is TaskKind.STTC:
            if response is None:
                problems.append(("response", f"required for {task.value}"))
            elif transcript is not None and "<开始回答>" in transcript:
                problems.append(("transcript", "contains the answer separator"))

    if problems:
        return None, problems
    return (
        UtteranceRecord(
            id=rid,
            audio=audio,
            duration=float(duration),
            language=language,
            task=task,
            transcript=transcript,
            timed=timed if task is TaskKind.SRWT else None,
            tag=tag,
            response=response if task is TaskKind.STTC else None,
        ),
        [],
    )


def _iter_rows(path: str | Path) -> Iterator[tuple[int, object]]:
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as e:
                yield lineno, e


def _scan(path: str | Path) -> Iterator[tuple[int, Optional[UtteranceRecord], list[Violation]]]:
    seen: dict[str, int] = {}
    for lineno, obj in _iter_rows(path):
        if isinstance(obj, json.JSONDecodeError):
            yield lineno, None, [Violation(lineno, None, "row", f"invalid JSON: {obj.msg}")]
            continue
        rec, problems = record_from_dict(obj)
        rid = obj.get("id") if isinstance(obj, dict) and isinstance(obj.get("id"), str) else None
        violations = [Violation(lineno, rid, f, m) for f, m in problems]
        if rid is not None:
            if rid in seen:
                violations.append(Violation(lineno, rid, "id", f"duplicate of line {seen[rid]}"))
                rec = None
            else:
                seen[rid] = lineno
        yield lineno, (rec if not violations else None), violations


def validate_manifest(path: str | Path) -> ValidationReport:
    """Check every row and collect all violations without stopping."""
    report = ValidationReport(str(path))
    for _, rec, violations in _scan(path):
        report.rows += 1
        if violations:
            report.violations.extend(violations)
        else:
            report.valid += 1
    return report


def load_manifest(path: str | Path, *, strict: bool = True) -> list[UtteranceRecord]:
    """Read a manifest.

    In strict mode the first invalid row raises SchemaError with its line
    number; otherwise invalid rows are logged and skipped.
    """
    records = []
    for lineno, rec, violations in _scan(path):
        if violations:
            if strict:
                v = violations[0]
                raise SchemaError(f"{v.field}: {v.message}", line=lineno, path=str(path))
            for v in violations:
                log.warning("%s: skipping %s", path, v)
            continue
        records.append(rec)
    return records


def write_manifest(records: Iterable[UtteranceRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for rec in records:
            f.write(rec.to_json())
            f.write("\n")


# -- prompts and training targets ---------------------------------------------------------


@dataclass(frozen=True)
class PromptPool:
    prompts: dict[TaskKind, tuple[str, ...]]
    version: int = 1

    def __post_init__(self):
        for task in TaskKind:
            entries = self.prompts.get(task)
            if entries is None:
                raise ValueError(f"prompt pool has no entries for {task.value}")
            if len(entries) != PROMPTS_PER_TASK:
                raise ValueError(f"{task.value}: expected {PROMPTS_PER_TASK} prompts, got {len(entries)}")
            if any(not p.strip() for p in entries):
                raise ValueError(f"{task.value}: empty prompt")
            if len(set(entries)) != len(entries):
                raise ValueError(f"{task.value}: duplicate prompts")

    @classmethod
    def from_dict(cls, obj: dict) -> "PromptPool":
        raw = obj.get("prompts", obj)
        prompts = {TaskKind.coerce(k): tuple(v) for k, v in raw.items()}
        return cls(prompts, version=int(obj.get("version", 1)))

    @classmethod
    def load(cls, path: str | Path | None = None) -> "PromptPool":
        """Load a pool from JSON; without a path, the bundled default pool."""
        if path is None:
            text = resources.files("asrx").joinpath("data/prompts.json").read_text(encoding="utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class TrainingExample:
    id: str
    task: TaskKind
    audio: str
    prompt: str
    target: str

    def to_json(self) -> str:
        return json.dumps(
            {"id": self.id, "task": self.task.value, "audio": self.audio, "prompt": self.prompt, "target": self.target},
            ensure_ascii=False,
        )


def prompt_index(seed: int, record_id: str) -> int:
    return int(keyed_rng(seed, "prompt", record_id).integers(PROMPTS_PER_TASK))


def build_training_example(record: UtteranceRecord, pool: PromptPool, seed: int) -> TrainingExample:
    """Pair a record's ASR+X target with one of the task's prompts.

    The prompt is picked by a generator keyed on (seed, record id), so the
    choice is stable under any sharding of the corpus.
    """
    try:
        target = serialize_label(record.label())
    except InvalidLabel as e:
        raise InvalidRecord(f"{record.id}: {e}") from e
    prompt = pool.prompts[record.task][prompt_index(seed, record.id)]
    return TrainingExample(record.id, record.task, record.audio, prompt, target)


# -- mixing -------------------------------------------------------------------------------


@dataclass(frozen=True)
class MixSource:
    path: str
    task: Optional[TaskKind] = None
    weight: Optional[float] = None  # None: proportional to the source's hours


@dataclass(frozen=True)
class MixSpec:
    sources: tuple[MixSource, ...]
    seed: int
    epochs: int = 1

    def __post_init__(self):
        if not self.sources:
            raise ValueError("mix needs at least one source")
        for s in self.sources:
            if s.weight is not None and not (s.weight > 0 and math.isfinite(s.weight)):
                raise ValueError(f"weight for {s.path} must be positive, got {s.weight}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


def mix_records(
    sources: Sequence[tuple[Sequence[UtteranceRecord], float]], seed: int, epochs: int = 1
) -> Iterator[tuple[int, UtteranceRecord]]:
    """Weighted interleave of record lists, without replacement within an epoch.

    Each source is shuffled once per epoch; at every step a source is drawn
    with probability proportional to its weight among sources that still
    have rows. Yields ``(source_index, record)``.
    """
    for i, (records, weight) in enumerate(sources):
        if not records:
            raise EmptySource(f"source {i} has no records")
        if not weight > 0:
            raise ValueError(f"source {i}: weight must be positive")
    for epoch in range(epochs):
        queues = []
        for i, (records, _) in enumerate(sources):
            order = keyed_rng(seed, "mix-shuffle", epoch, i).permutation(len(records))
            queues.append([records[k] for k in order])
        pos = [0] * len(sources)
        live = [i for i in range(len(sources))]
        rng = keyed_rng(seed, "mix-draw", epoch)
        while live:
            cum = []
            acc = 0.0
            for i in live:
                acc += sources[i][1]
                cum.append(acc)
            pick = live[min(bisect.bisect_right(cum, rng.random() * acc), len(live) - 1)]
            yield pick, queues[pick][pos[pick]]
            pos[pick] += 1
            if pos[pick] == len(queues[pick]):
                live.remove(pick)


def load_sources(spec: MixSpec) -> list[tuple[list[UtteranceRecord], float]]:
    loaded = []
    for src in spec.sources:
        records = load_manifest(src.path)
        if src.task is not None:
            records = [r for r in records if r.task is TaskKind.coerce(src.task)]
        if not records:
            raise EmptySource(f"{src.path}: no usable records")
        weight = src.weight if src.weight is not None else sum(r.duration for r in records) / 3600.0
        loaded.append((records, weight))
    return loaded


def mix_datasets(spec: MixSpec, pool: PromptPool) -> Iterator[TrainingExample]:
    """Stream training examples drawn from several manifests, fully determined by ``spec.seed``."""
    sources = load_sources(spec)
    for _, rec in mix_records(sources, spec.seed, spec.epochs):
        yield build_training_example(rec, pool, spec.seed)


# -- balancing and statistics -------------------------------------------------------------


def balance_classes(records: Sequence[UtteranceRecord], task: TaskKind | str, seed: int = 0) -> list[UtteranceRecord]:
    """Down-sample every class of ``task`` to the size of its smallest class.

    All classes of the task vocabulary take part, so a class with no rows
    empties the result. Only records of ``task`` are considered; survivors
    keep their input order.
    """
    task = TaskKind.coerce(task)
    if task not in TAG_TASKS:
        raise WrongTask(f"{task.value} is not a classification task")
    by_class: dict[str, list[int]] = {label: [] for label in VOCAB[task]}
    for i, rec in enumerate(records):
        if rec.task is not task:
            continue
        if rec.tag is None:
            raise MissingTag(f"record {rec.id} has no {task.value} tag")
        if rec.tag not in by_class:
            raise MissingTag(f"record {rec.id} has tag {rec.tag!r} outside the {task.value} vocabulary")
        by_class[rec.tag].append(i)
    target = min(len(v) for v in by_class.values())
    if target == 0:
        empty = [c for c, v in by_class.items() if not v]
        log.warning("balance %s: no rows for class(es) %s; result is empty", task.value, ", ".join(empty))
        return []
    keep: list[int] = []
    for label, idx in by_class.items():
        if len(idx) > target:
            chosen = keyed_rng(seed, "balance", task.value, label).choice(len(idx), size=target, replace=False)
            idx = [idx[k] for k in chosen]
        keep.extend(idx)
    keep.sort()
    return [records[i] for i in keep]


@dataclass
class CorpusStats:
    seconds_by_task: dict[str, float]
    seconds_by_class: dict[tuple[str, str], float]
    seconds_by_language: dict[str, float]
    rows_by_task: dict[str, int]

    @staticmethod
    def hours(seconds: float) -> float:
        return seconds / 3600.0

    @property
    def total_hours(self) -> float:
        return self.hours(math.fsum(self.seconds_by_task.values()))

    def rows(self) -> list[tuple[str, str, int, float]]:
        """(group, key, items, hours) in a fixed order."""
        out = []
        for task, secs in self.seconds_by_task.items():
            out.append(("task", task, self.rows_by_task[task], self.hours(secs)))
        for (task, label), secs in self.seconds_by_class.items():
            out.append(("class", f"{task}/{label}", -1, self.hours(secs)))
        for lang, secs in self.seconds_by_language.items():
            out.append(("language", lang, -1, self.hours(secs)))
        return out

    def to_text(self) -> str:
        lines = [f"{'group':<9} {'key':<22} {'hours':>12}"]
        for group, key, _, hours in self.rows():
            lines.append(f"{group:<9} {key:<22} {hours:>12.4f}")
        lines.append(f"{'total':<9} {'':<22} {self.total_hours:>12.4f}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["group", "key", "hours"])
        for group, key, _, hours in self.rows():
            w.writerow([group, key, repr(hours)])
        return buf.getvalue()


def corpus_stats(records: Iterable[UtteranceRecord]) -> CorpusStats:
    by_task: dict[str, list[float]] = {t.value: [] for t in TaskKind}
    by_class: dict[tuple[str, str], list[float]] = {
        (t.value, label): [] for t in TaskKind if t in VOCAB for label in VOCAB[t]
    }
    by_lang: dict[str, list[float]] = {lang: [] for lang in LANGUAGES}
    counts: Counter = Counter()
    for rec in records:
        by_task[rec.task.value].append(rec.duration)
        counts[rec.task.value] += 1
        by_lang[rec.language].append(rec.duration)
        if rec.tag is not None:
            by_class.setdefault((rec.task.value, rec.tag), []).append(rec.duration)
    return CorpusStats(
        {k: math.fsum(v) for k, v in by_task.items()},
        {k: math.fsum(v) for k, v in by_class.items()},
        {k: math.fsum(v) for k, v in by_lang.items()},
        {t.value: counts[t.value] for t in TaskKind},
    )
