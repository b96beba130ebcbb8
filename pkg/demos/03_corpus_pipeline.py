"""
From an ASR manifest to mixed multi-task training examples
==========================================================

Builds a tiny synthetic corpus in a temporary directory, then runs the
vocal-event insertion, class balancing, target building and mixing steps.
Every random choice is keyed on (seed, record id).
"""

import tempfile
from pathlib import Path

import numpy as np

from asrx.augment import AudioClip, write_wav
from asrx.corpus import (
    PromptPool,
    UtteranceRecord,
    balance_classes,
    build_training_example,
    corpus_stats,
    mix_records,
    write_manifest,
    validate_manifest,
)
from asrx.grammar import VOCAB, TaskKind
from asrx.pipeline import insert_events_batch

SEED = 7
root = Path(tempfile.mkdtemp(prefix="asrx-demo-"))
rng = np.random.default_rng(0)

# speech: 60 short utterances
(root / "wav").mkdir()
records = []
for i in range(60):
    rid = f"utt{i:03d}"
    write_wav(AudioClip(rng.integers(-2000, 2000, 8000, dtype=np.int16)), root / "wav" / f"{rid}.wav")
    records.append(UtteranceRecord(rid, f"wav/{rid}.wav", 0.5, "CN", TaskKind.ASR, "播放小梦想大梦想"))
write_manifest(records, root / "asr.jsonl")
print(validate_manifest(root / "asr.jsonl").summary()["valid"], "valid rows")

# vocal events, one directory per class
for label in VOCAB[TaskKind.VED]:
    d = root / "events" / label.replace(" ", "_")
    d.mkdir(parents=True)
    write_wav(AudioClip(rng.integers(-9000, 9000, 1600, dtype=np.int16)), d / "a.wav")

ved = insert_events_batch(records, root=root, events_dir="events", out_dir="ved_wav", seed=SEED)
print(ved[0].to_json())

# equal counts per class, as in a balanced test set
balanced = balance_classes(ved, TaskKind.VED, seed=SEED)
print(len(ved), "->", len(balanced), "after balancing")

pool = PromptPool.load()
example = build_training_example(balanced[0], pool, SEED)
print("prompt:", example.prompt)
print("target:", example.target)

# 1:3 mix of VED and ASR examples, drawn without replacement
stream = [build_training_example(r, pool, SEED) for _, r in mix_records([(balanced, 1.0), (records, 3.0)], SEED)]
print([e.task.value for e in stream[:12]])

print(corpus_stats(records + balanced).to_text())
