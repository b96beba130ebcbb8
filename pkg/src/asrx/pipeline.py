"""Manifest-level batch jobs built on the per-record operations.

Each job maps a top-level worker function over records, either inline or
in a process pool. Results come back in input order and every random
choice is keyed on the record id, so the worker count never changes the
output.
"""
from __future__ import annotations

import hashlib
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from functools import partial
from pathlib import Path
from typing import Callable, Iterable, Sequence, TypeVar

from .augment import add_noise, insert_event, read_wav, write_wav
from .corpus import PromptPool, TrainingExample, UtteranceRecord, build_training_example
from .errors import InvalidClass
from .grammar import TaskKind, canonical_tag
from .seeding import keyed_rng

T = TypeVar("T")
R = TypeVar("R")

_UNSAFE = re.compile(r"[^0-9A-Za-z._-]")


def run_parallel(fn: Callable[[T], R], items: Sequence[T], workers: int = 1, chunksize: int = 16) -> list[R]:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))


def audio_filename(record_id: str) -> str:
    """File name for a record's output audio; ids with unsafe characters get a hash suffix."""
    safe = _UNSAFE.sub("_", record_id)
    if safe != record_id:
        safe += "-" + hashlib.sha1(record_id.encode("utf-8")).hexdigest()[:8]
    return safe + ".wav"


def scan_event_dir(events_dir: str | Path) -> dict[str, list[str]]:
    """Map VED class -> sorted clip paths from an ``<events_dir>/<class>/*.wav`` tree."""
    events_dir = Path(events_dir)
    out: dict[str, list[str]] = {}
    for sub in sorted(p for p in events_dir.iterdir() if p.is_dir()):
        label = canonical_tag(TaskKind.VED, sub.name.replace("_", " "))
        if label is None:
            raise InvalidClass(f"{sub}: directory name is not a VED class")
        clips = sorted(str(p) for p in sub.glob("*.wav"))
        if clips:
            out[label] = clips
    if not out:
        raise InvalidClass(f"{events_dir}: no event clips found")
    return out


def _insert_one(rec: UtteranceRecord, *, root: str, events: dict, out_dir: str, seed: int) -> UtteranceRecord:
    classes = sorted(events)
    rng = keyed_rng(seed, "event-pick", rec.id)
    label = classes[int(rng.integers(len(classes)))]
    clip_path = events[label][int(rng.integers(len(events[label])))]
    speech = read_wav(Path(root) / rec.audio)
    clip, new_rec = insert_event(speech, rec, read_wav(clip_path), label, seed)
    out_path = Path(root) / out_dir / audio_filename(rec.id)
    write_wav(clip, out_path)
    return replace(new_rec, audio=os.path.relpath(out_path, root))


def insert_events_batch(
    records: Iterable[UtteranceRecord],
    *,
    root: str | Path,
    events_dir: str | Path,
    out_dir: str | Path,
    seed: int,
    workers: int = 1,
) -> list[UtteranceRecord]:
    """Turn every ASR record into a VED record with a spliced-in event clip."""
    root = str(root)
    events = scan_event_dir(Path(root) / events_dir)
    (Path(root) / out_dir).mkdir(parents=True, exist_ok=True)
    asr = [r for r in records if r.task is TaskKind.ASR]
    fn = partial(_insert_one, root=root, events=events, out_dir=str(out_dir), seed=seed)
    return run_parallel(fn, asr, workers)


def _noise_one(rec: UtteranceRecord, *, root: str, noises: list, out_dir: str, seed: int, snr_range: tuple) -> UtteranceRecord:
    rng = keyed_rng(seed, "noise-pick", rec.id)
    noise_path = noises[int(rng.integers(len(noises)))]
    lo, hi = snr_range
    snr = float(lo + (hi - lo) * rng.random())
    clip = add_noise(read_wav(Path(root) / rec.audio), read_wav(noise_path), snr, seed, key=rec.id)
    out_path = Path(root) / out_dir / audio_filename(rec.id)
    write_wav(clip, out_path)
    return replace(rec, audio=os.path.relpath(out_path, root))


def add_noise_batch(
    records: Iterable[UtteranceRecord],
    *,
    root: str | Path,
    noise_dir: str | Path,
    out_dir: str | Path,
    snr_range: tuple[float, float],
    seed: int,
    workers: int = 1,
) -> list[UtteranceRecord]:
    """Noise-augment every record with a clip from ``noise_dir`` at an SNR drawn uniformly from ``snr_range``."""
    root = str(root)
    noises = sorted(str(p) for p in (Path(root) / noise_dir).glob("*.wav"))
    if not noises:
        raise FileNotFoundError(f"{noise_dir}: no noise clips")
    if snr_range[0] > snr_range[1]:
        raise ValueError("snr range must be (low, high)")
    (Path(root) / out_dir).mkdir(parents=True, exist_ok=True)
    fn = partial(_noise_one, root=root, noises=noises, out_dir=str(out_dir), seed=seed, snr_range=tuple(snr_range))
    return run_parallel(fn, list(records), workers)


def build_examples(
    records: Sequence[UtteranceRecord], pool: PromptPool, seed: int, workers: int = 1
) -> list[TrainingExample]:
    return run_parallel(partial(build_training_example, pool=pool, seed=seed), list(records), workers, chunksize=256)
