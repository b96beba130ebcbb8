"""Corpus construction and scoring for ASR+X multi-task speech understanding data."""
from .errors import *  # noqa: F401,F403
from .grammar import (
    CHAT_SEPARATOR,
    VOCAB,
    AsrXLabel,
    TaskKind,
    TimedToken,
    extract_tag,
    parse_label,
    parse_timed_transcript,
    serialize_label,
    serialize_timed_transcript,
)
from .metrics import (
    AasResult,
    ConfusionMatrix,
    EditAlignment,
    ErrorRate,
    aas,
    cer,
    classification_accuracy,
    edit_alignment,
    mer,
    tokenize_mixed,
    wer,
)

__version__ = "0.1.0"
