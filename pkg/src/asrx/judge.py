"""LLM-as-judge scoring for speech-to-text chat answers.

The judge sees the spoken question (as text), a reference answer and the
model's answer, and replies with a 1-10 score. Requests use the common
chat-completions JSON shape, so any compatible endpoint works, including a
local mock.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import re
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import JudgeUnreachable, UnparseableVerdict
from .grammar import CHAT_SEPARATOR, TaskKind

log = logging.getLogger(__name__)

API_KEY_ENV = "ASRX_JUDGE_API_KEY"

SYSTEM_PROMPT = (
    "You are a helpful and precise assistant for checking the quality of the answer. "
    "You will be given a spoken question transcribed to text, a reference answer and an "
    "assistant's answer."
)

USER_TEMPLATE = (
    "[Question]\n{question}\n\n"
    "[Reference Answer]\n{reference}\n\n"
    "[Assistant Answer]\n{answer}\n\n"
    "Rate the helpfulness, relevance, accuracy and level of detail of the assistant's answer, "
    "using the reference answer as a guide. Output a single integer score from 1 to 10, "
    "where higher is better, and nothing else."
)

_INT_RE = re.compile(r"[0-9]+")


@dataclass(frozen=True)
class JudgeConfig:
    endpoint: str
    model: str
    timeout: float = 30.0
    max_retries: int = 2
    backoff: float = 0.5
    temperature: float = 0.0
    max_in_flight: int = 4
    cache_path: Optional[str] = None
    system_prompt: str = SYSTEM_PROMPT
    user_template: str = USER_TEMPLATE
    api_key_env: str = API_KEY_ENV

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if not self.timeout > 0:
            raise ValueError("timeout must be > 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")

    @classmethod
    def from_dict(cls, obj: dict) -> "JudgeConfig":
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in obj.items() if k in known})


def build_request(question: str, reference_answer: str, model_answer: str, cfg: JudgeConfig) -> dict:
    for name, value in (("question", question), ("reference answer", reference_answer), ("model answer", model_answer)):
        if not value or not value.strip():
            raise ValueError(f"{name} is empty")
    user = cfg.user_template.format(question=question, reference=reference_answer, answer=model_answer)
    return {
        "model": cfg.model,
        "messages": [
            {"role": "system", "content": cfg.system_prompt},
            {"role": "user", "content": user},
        ],
        "temperature": cfg.temperature,
    }


def request_key(payload: dict) -> str:
    blob = json.dumps(payload, ensure_ascii=False, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def parse_verdict(reply: str) -> int:
    """First integer in 1..10 appearing in the reply ("Score: 10/10" gives 10)."""
    for m in _INT_RE.finditer(reply or ""):
        value = int(m.group())
        if 1 <= value <= 10:
            return value
    raise UnparseableVerdict(reply or "")


class JudgeClient:
    """Posts judge requests with retries, caching replies by request hash.

    The cache lives in memory and, when ``cfg.cache_path`` is set, in a JSON
    file that is reloaded on construction.
    """

    def __init__(self, cfg: JudgeConfig, opener=None):
        self.cfg = cfg
        self._open = opener or urllib.request.urlopen
        self._lock = threading.Lock()
        self.cache: dict[str, str] = {}
        self.calls = 0
        self.cache_hits = 0
        if cfg.cache_path and Path(cfg.cache_path).exists():
            self.cache = json.loads(Path(cfg.cache_path).read_text(encoding="utf-8"))

    def _post(self, payload: dict) -> str:
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.cfg.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        req = urllib.request.Request(self.cfg.endpoint, data=body, headers=headers, method="POST")
        with self._open(req, timeout=self.cfg.timeout) as resp:
            data = json.loads(resp.read().decode("utf-8"))
        return data["choices"][0]["message"]["content"] or ""

    def complete(self, payload: dict) -> str:
        key = request_key(payload)
        with self._lock:
            if key in self.cache:
                self.cache_hits += 1
                return self.cache[key]
        last_err: Exception | None = None
        for attempt in range(self.cfg.max_retries + 1):
            with self._lock:
                self.calls += 1
            try:
                reply = self._post(payload)
                break
            except (urllib.error.URLError, OSError, ValueError, KeyError, IndexError, TypeError) as e:
                last_err = e
                log.warning("judge request failed (attempt %d/%d): %s", attempt + 1, self.cfg.max_retries + 1, e)
                if attempt < self.cfg.max_retries and self.cfg.backoff > 0:
                    time.sleep(self.cfg.backoff * 2**attempt)
        else:
            raise JudgeUnreachable(f"{self.cfg.endpoint}: {last_err}") from last_err
        with self._lock:
            self.cache[key] = reply
            if self.cfg.cache_path:
                self._flush()
        return reply

    def _flush(self) -> None:
        path = Path(self.cfg.cache_path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(json.dumps(self.cache, ensure_ascii=False, sort_keys=True, indent=0), encoding="utf-8")
        tmp.replace(path)


def judge_sttc(
    question: str, reference_answer: str, model_answer: str, cfg: JudgeConfig, client: JudgeClient | None = None
) -> int:
    client = client or JudgeClient(cfg)
    reply = client.complete(build_request(question, reference_answer, model_answer, cfg))
    return parse_verdict(reply)


@dataclass(frozen=True)
class JudgeItem:
    id: str
    question: str
    reference_answer: str
    model_answer: str


@dataclass
class JudgeSummary:
    scores: dict[str, int] = field(default_factory=dict)
    unparseable: list[str] = field(default_factory=list)
    failed: list[str] = field(default_factory=list)

    @property
    def mean(self) -> float:
        if not self.scores:
            return math.nan
        return math.fsum(self.scores.values()) / len(self.scores)


def judge_items(items: Sequence[JudgeItem], cfg: JudgeConfig, client: JudgeClient | None = None) -> JudgeSummary:
    """Judge many items with at most ``cfg.max_in_flight`` requests outstanding."""
    client = client or JudgeClient(cfg)

    def one(item: JudgeItem):
        try:
            return item.id, judge_sttc(item.question, item.reference_answer, item.model_answer, cfg, client), None
        except UnparseableVerdict:
            return item.id, None, "unparseable"
        except (JudgeUnreachable, ValueError) as e:
            log.warning("judge failed for %s: %s", item.id, e)
            return item.id, None, "failed"

    summary = JudgeSummary()
    with ThreadPoolExecutor(max_workers=cfg.max_in_flight) as pool:
        for item_id, score, problem in pool.map(one, items):
            if problem == "unparseable":
                summary.unparseable.append(item_id)
            elif problem == "failed":
                summary.failed.append(item_id)
            else:
                summary.scores[item_id] = score
    return summary


def split_answer(model_output: str) -> str:
    """Answer part of an STTC output (after the separator, or everything if it is missing)."""
    cut = model_output.find(CHAT_SEPARATOR)
    return model_output[cut + len(CHAT_SEPARATOR) :].strip() if cut >= 0 else model_output.strip()


def items_from_run(records: Iterable, hyps: dict[str, str]) -> list[JudgeItem]:
    items = []
    for rec in records:
        if rec.task is not TaskKind.STTC or rec.id not in hyps:
            continue
        items.append(JudgeItem(rec.id, rec.transcript, rec.response, split_answer(hyps[rec.id])))
    return items
