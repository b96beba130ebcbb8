"""Seeded random generators for labels, records and audio used across the tests."""
from __future__ import annotations

import random

from asrx.corpus import UtteranceRecord
from asrx.grammar import VOCAB, AsrXLabel, TaskKind, TimedToken

CJK = "播放小梦想大梦父母的坏话你一个享受者有什么跟这复仇去叫板呢我感觉不太满意抱歉们会让"
LATIN = ["hello", "world", "everyday", "ok", "AI", "test", "x", "Go"]
PUNCT = "，。！？,.!? <>"


def transcript(rng: random.Random, max_len: int = 20, brackets: bool = True) -> str:
    pool = CJK + "abcXYZ" + (PUNCT if brackets else "，。 ")
    return "".join(rng.choice(pool) for _ in range(rng.randint(0, max_len)))


def timed_tokens(rng: random.Random, max_tokens: int = 12) -> list[TimedToken]:
    t = rng.randint(0, 300)
    out = []
    for _ in range(rng.randint(0, max_tokens)):
        tok = rng.choice(CJK) if rng.random() < 0.7 else rng.choice(LATIN)
        start = t + rng.randint(0, 30)
        end = start + rng.randint(0, 60)
        out.append(TimedToken(tok, start / 100, end / 100))
        # next token may start up to 5 cs before this one ends, but never before this start
        t = max(start, end - rng.randint(0, 5))
    return out


def label(rng: random.Random, task: TaskKind) -> AsrXLabel:
    if task is TaskKind.ASR:
        return AsrXLabel.asr(transcript(rng))
    if task is TaskKind.SRWT:
        return AsrXLabel.timestamped(timed_tokens(rng))
    if task is TaskKind.STTC:
        return AsrXLabel.chat(transcript(rng).replace("<", "").replace(">", ""), transcript(rng) + "<b>")
    return AsrXLabel(task, transcript(rng), tag=rng.choice(VOCAB[task]))


def record(rng: random.Random, task: TaskKind, rid: str, language: str = "CN") -> UtteranceRecord:
    lab = label(rng, task)
    text = lab.transcript or "空"
    if task is TaskKind.SRWT and not lab.timed:
        lab = AsrXLabel.timestamped([TimedToken("空", 0.0, 0.5)])
        text = lab.transcript
    return UtteranceRecord(
        id=rid,
        audio=f"wav/{rid}.wav",
        duration=round(rng.uniform(0.5, 10.0), 3),
        language=language,
        task=task,
        transcript=lab.transcript if task is TaskKind.SRWT else text,
        timed=lab.timed,
        tag=lab.tag,
        response=lab.response,
    )


def make_audio_corpus(root, n: int, seed: int = 0, samples: int = 4000, event_samples: int = 800):
    """Write ``n`` ASR utterances plus an ``events/<class>/*.wav`` tree under ``root``.

    Returns the manifest path relative to ``root``.
    """
    from pathlib import Path

    import numpy as np

    from asrx.augment import AudioClip, write_wav
    from asrx.corpus import write_manifest

    root = Path(root)
    rng = random.Random(seed)
    nrng = np.random.default_rng(seed)
    (root / "wav").mkdir(parents=True, exist_ok=True)
    recs = []
    for i in range(n):
        rid = f"spk{i % 10:02d}-utt{i:05d}"
        write_wav(AudioClip(nrng.integers(-3000, 3000, samples, dtype=np.int16)), root / "wav" / f"{rid}.wav")
        text = "".join(rng.choice(CJK) for _ in range(rng.randint(3, 15)))
        recs.append(UtteranceRecord(rid, f"wav/{rid}.wav", samples / 16000, "CN", TaskKind.ASR, text))
    write_manifest(recs, root / "asr.jsonl")
    for label in VOCAB[TaskKind.VED]:
        d = root / "events" / label.replace(" ", "_")
        d.mkdir(parents=True, exist_ok=True)
        for k in range(3):
            write_wav(AudioClip(nrng.integers(-8000, 8000, event_samples + 100 * k, dtype=np.int16)), d / f"clip{k}.wav")
    (root / "noise").mkdir(exist_ok=True)
    write_wav(AudioClip(nrng.integers(-2000, 2000, 3000, dtype=np.int16)), root / "noise" / "babble.wav")
    return "asr.jsonl"
