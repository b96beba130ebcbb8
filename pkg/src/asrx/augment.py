"""Audio and annotation pipelines: vocal-event insertion, annotator intersection, noise mixing."""
from __future__ import annotations

import csv
import math
import wave
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .errors import EmptyClip, InvalidClass, SilentNoise, TaskMismatch, UnsupportedFormat
from .grammar import VOCAB, TaskKind, canonical_tag
from .seeding import keyed_rng

SAMPLE_RATE = 16000
INT16_MIN, INT16_MAX = -32768, 32767


@dataclass(frozen=True, eq=False)
class AudioClip:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.int16))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def __eq__(self, other):
        if not isinstance(other, AudioClip):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(self.samples, other.samples)


def read_wav(path: str | Path, *, sample_rate: int = SAMPLE_RATE) -> AudioClip:
    """Read a mono 16-bit PCM WAV at the canonical rate. Anything else is rejected, never converted."""
    try:
        with wave.open(str(path), "rb") as w:
            channels, width, rate, frames = w.getnchannels(), w.getsampwidth(), w.getframerate(), w.getnframes()
            if channels != 1:
                raise UnsupportedFormat(f"{path}: {channels} channels, need mono")
            if width != 2:
                raise UnsupportedFormat(f"{path}: {8 * width}-bit samples, need 16-bit PCM")
            if rate != sample_rate:
                raise UnsupportedFormat(f"{path}: {rate} Hz, need {sample_rate} Hz")
            data = w.readframes(frames)
    except wave.Error as e:
        raise UnsupportedFormat(f"{path}: {e}") from e
    return AudioClip(np.frombuffer(data, dtype="<i2").astype(np.int16), rate)


def write_wav(clip: AudioClip, path: str | Path) -> None:
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(clip.sample_rate)
        w.writeframes(clip.samples.astype("<i2").tobytes())


def _check_rate(*clips: AudioClip) -> None:
    for c in clips:
        if c.sample_rate != SAMPLE_RATE:
            raise UnsupportedFormat(f"clip at {c.sample_rate} Hz, need {SAMPLE_RATE} Hz")


def insertion_offset(seed: int, record_id: str, speech_len: int) -> int:
    """Sample boundary in ``[0, speech_len]``, uniform and keyed on the record id."""
    return int(keyed_rng(seed, "insert-offset", record_id).integers(0, speech_len + 1))


def insert_event(speech: AudioClip, speech_record, event: AudioClip, event_class: str, seed: int):
    """Splice a vocal-event clip into speech and relabel the record as VED.

    Returns ``(clip, record)``. The event goes at a random sample boundary;
    the tag is appended at the end of the label wherever the event lands.
    """
    _check_rate(speech, event)
    label = canonical_tag(TaskKind.VED, event_class)
    if label is None:
        raise InvalidClass(f"{event_class!r} is not a VED class")
    if len(speech) == 0 or len(event) == 0:
        raise EmptyClip("speech and event clips must be non-empty")
    if speech_record.task is not TaskKind.ASR:
        raise TaskMismatch(f"record {speech_record.id} is {speech_record.task.value}, need ASR")
    k = insertion_offset(seed, speech_record.id, len(speech))
    out = AudioClip(np.concatenate([speech.samples[:k], event.samples, speech.samples[k:]]), speech.sample_rate)
    rec = replace(speech_record, task=TaskKind.VED, tag=label, duration=out.duration)
    return out, rec


@dataclass(frozen=True)
class AnnotationFile:
    task: TaskKind
    labels: Mapping[str, str]
    annotator: str = ""

    def __post_init__(self):
        allowed = set(VOCAB.get(self.task, ()))
        for k, v in self.labels.items():
            if v not in allowed:
                raise InvalidClass(f"{k}: {v!r} is not a {self.task.value} class")


def read_annotations(path: str | Path, task: TaskKind | str, annotator: Optional[str] = None) -> AnnotationFile:
    """Two-column ``id<TAB>label`` file. Labels match the vocabulary case-insensitively."""
    task = TaskKind.coerce(task)
    labels: dict[str, str] = {}
    with open(path, "r", encoding="utf-8", newline="") as f:
        for lineno, row in enumerate(csv.reader(f, delimiter="\t", quoting=csv.QUOTE_NONE), 1):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            label = canonical_tag(task, row[1])
            if label is None:
                raise InvalidClass(f"{path}:{lineno}: {row[1]!r} is not a {task.value} class")
            labels[row[0]] = label
    return AnnotationFile(task, labels, annotator if annotator is not None else Path(path).stem)


def write_annotations(ann: AnnotationFile, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        for k in sorted(ann.labels):
            f.write(f"{k}\t{ann.labels[k]}\n")


def intersect_annotations(a: AnnotationFile, b: AnnotationFile) -> AnnotationFile:
    """Keep the ids both annotators labelled, and labelled the same way."""
    if a.task is not b.task:
        raise TaskMismatch(f"cannot intersect {a.task.value} with {b.task.value}")
    agreed = {k: v for k, v in sorted(a.labels.items()) if b.labels.get(k) == v}
    names = sorted({a.annotator, b.annotator} - {""})
    return AnnotationFile(a.task, agreed, "+".join(names))


def crop_noise(noise: np.ndarray, length: int, rng: np.random.Generator) -> np.ndarray:
    """Loop ``noise`` as needed and cut ``length`` samples from a random start."""
    start = int(rng.integers(len(noise)))
    reps = math.ceil((start + length) / len(noise))
    return np.tile(noise, reps)[start : start + length]


def snr_gain(speech: np.ndarray, noise: np.ndarray, snr_db: float) -> float:
    """Factor that puts ``noise`` ``snr_db`` decibels below ``speech`` in mean power."""
    p_speech = float(np.mean(np.square(speech, dtype=np.float64)))
    p_noise = float(np.mean(np.square(noise, dtype=np.float64)))
    if p_noise == 0.0:
        raise SilentNoise("noise segment has zero power")
    return math.sqrt(p_speech / (p_noise * 10.0 ** (snr_db / 10.0)))


def mix_at_snr(speech: np.ndarray, noise_segment: np.ndarray, snr_db: float) -> tuple[np.ndarray, float]:
    """Unquantized mix ``speech + gain * noise_segment`` and the gain used."""
    gain = snr_gain(speech, noise_segment, snr_db)
    return speech.astype(np.float64) + gain * noise_segment.astype(np.float64), gain


def add_noise(speech: AudioClip, noise: AudioClip, snr_db: float, seed: int, key: str = "") -> AudioClip:
    """Mix looped/cropped noise into speech at ``snr_db``; ``+inf`` returns the speech unchanged.

    The result is rounded and saturated to the 16-bit range.
    """
    _check_rate(speech, noise)
    if math.isnan(snr_db) or snr_db == -math.inf:
        raise ValueError(f"invalid SNR {snr_db}")
    if snr_db == math.inf:
        return AudioClip(speech.samples.copy(), speech.sample_rate)
    if len(speech) == 0:
        raise EmptyClip("speech clip is empty")
    if len(noise) == 0 or not np.any(noise.samples):
        raise SilentNoise("noise clip is silent")
    segment = crop_noise(noise.samples, len(speech), keyed_rng(seed, "noise-start", key))
    mixed, _ = mix_at_snr(speech.samples, segment, snr_db)
    return AudioClip(np.clip(np.rint(mixed), INT16_MIN, INT16_MAX).astype(np.int16), speech.sample_rate)
