import csv
import io
import random

import pytest

from asrx.corpus import UtteranceRecord
from asrx.errors import NoOverlap
from asrx.grammar import VOCAB, TaskKind, parse_timed_transcript, serialize_label
from asrx.scoring import (
    escape_field,
    read_hypotheses,
    render_report,
    score_run,
    unescape_field,
    write_hypotheses,
)

import gen


def _refs(task, n, rng, language="CN"):
    return [gen.record(rng, task, f"{task.value}{i}", language) for i in range(n)]


@pytest.mark.parametrize("task", [TaskKind.ASR, TaskKind.SRWT, TaskKind.SER, TaskKind.SGC, TaskKind.STTC])
def test_identical_outputs_score_perfectly(task):
    rng = random.Random(1)
    refs = [r for r in _refs(task, 50, rng) if r.transcript.strip()]
    hyps = {r.id: serialize_label(r.label()) for r in refs}
    rep = score_run(refs, hyps, task)
    assert rep.item_count == len(refs) and rep.unparseable == 0
    if task is TaskKind.SRWT:
        assert rep.value == 0.0
    elif task in (TaskKind.SER, TaskKind.SGC):
        assert rep.value == 1.0
    else:
        assert rep.value == 0.0


def _sgc(tags):
    return [UtteranceRecord(f"s{i}", "a.wav", 1.0, "CN", TaskKind.SGC, "帮我调大声音", tag=t) for i, t in enumerate(tags)]


def test_sgc_two_of_four_wrong():
    refs = _sgc(["male", "male", "female", "female"])
    hyps = {"s0": "帮我调大声音<MALE>", "s1": "帮我调大声音<FEMALE>", "s2": "帮我调大声音<MALE>", "s3": "帮我调大声音<FEMALE>"}
    rep = score_run(refs, hyps, "SGC")
    assert rep.value == 0.5
    c = rep.confusion
    assert c.count("male", "female") + c.count("female", "male") == 2


def test_missing_hypotheses_listed():
    refs = _sgc(["male"] * 100)
    hyps = {r.id: "x<MALE>" for r in refs[10:]}
    hyps["stray"] = "x<MALE>"
    rep = score_run(refs, hyps, "SGC")
    assert rep.item_count == 90
    assert rep.missing_ids == [f"s{i}" for i in range(10)]
    assert rep.extra_ids == ["stray"]


def test_no_overlap():
    with pytest.raises(NoOverlap):
        score_run(_sgc(["male"]), {"zz": "x"}, "SGC")


def test_tag_accuracy_equals_one_pass_count():
    rng = random.Random(3)
    labels = VOCAB[TaskKind.SER]
    refs = [UtteranceRecord(f"e{i}", "a", 1.0, "CN", TaskKind.SER, "句子", tag=rng.choice(labels)) for i in range(400)]
    hyps = {}
    for r in refs:
        u = rng.random()
        hyps[r.id] = "句子" if u < 0.1 else f"句子<{rng.choice(labels).upper()}>"
    rep = score_run(refs, hyps, "SER")
    correct = 0
    for r in refs:
        out = hyps[r.id]
        if out.endswith(">") and out[out.rindex("<") + 1 : -1].lower() == r.tag:
            correct += 1
    assert rep.value == correct / len(refs)
    assert rep.unparseable == sum(1 for v in hyps.values() if "<" not in v)


def test_asr_routes_metric_by_language():
    refs = [
        UtteranceRecord("c", "a", 1.0, "CN", TaskKind.ASR, "播放小梦想大梦想"),
        UtteranceRecord("e", "a", 1.0, "EN", TaskKind.ASR, "the cat sat"),
        UtteranceRecord("m", "a", 1.0, "mixed", TaskKind.ASR, "播放hello"),
    ]
    rep = score_run(refs, {"c": "播放小梦想", "e": "the cat", "m": "播放 hullo"}, "ASR")
    assert list(rep.error_rates) == ["CER", "WER", "MER"]
    assert rep.error_rates["CER"].rate == pytest.approx(3 / 8)
    assert rep.error_rates["WER"].rate == pytest.approx(1 / 3)
    assert rep.error_rates["MER"].rate == pytest.approx(1 / 3)


def test_srwt_unparseable_and_shift():
    refs = [UtteranceRecord("t", "a", 1.0, "CN", TaskKind.SRWT, "父母", timed=tuple(parse_timed_transcript("<0.21>父<0.47> <0.46>母<0.60>"))),
            UtteranceRecord("u", "a", 1.0, "CN", TaskKind.SRWT, "父", timed=tuple(parse_timed_transcript("<0.10>父<0.20>")))]
    rep = score_run(refs, {"t": "<0.26>父<0.52> <0.51>母<0.65>", "u": "garbage<"}, "SRWT")
    assert rep.unparseable == 1
    assert rep.aas.aligned_pairs == 2 and rep.value == pytest.approx(50.0)
    assert rep.aas.unaligned_ref == 1


def test_score_is_deterministic():
    rng = random.Random(5)
    refs = _refs(TaskKind.SER, 30, rng)
    hyps = {r.id: f"{r.transcript}<{rng.choice(VOCAB[TaskKind.SER]).upper()}>" for r in refs}
    a = render_report([score_run(refs, hyps, "SER")])
    b = render_report([score_run(refs, dict(reversed(list(hyps.items()))), "SER")])
    assert a == b


def test_render_single_acc_report():
    refs = _sgc(["male", "female"])
    rep = score_run(refs, {"s0": "x<MALE>", "s1": "x<MALE>"}, "SGC")
    text, csv_text = render_report([rep])
    rows = list(csv.reader(io.StringIO(csv_text)))
    assert rows[0][:4] == ["task", "metric", "key", "value"]
    headline = [r for r in rows[1:] if r[2] == "all"]
    assert len(headline) == 1 and headline[0][1:4] == ["ACC", "all", "50.00"]
    assert "== SGC ==" in text


def test_render_sections_in_task_order():
    rng = random.Random(2)
    reps = []
    for task in (TaskKind.SAP, TaskKind.ASR, TaskKind.SER):
        refs = [r for r in _refs(task, 10, rng) if r.transcript.strip()]
        reps.append(score_run(refs, {r.id: serialize_label(r.label()) for r in refs}, task))
    text, csv_text = render_report(reps)
    order = [line[3:-3] for line in text.splitlines() if line.startswith("== ")]
    assert order == ["ASR", "SER", "SAP"]
    rows = list(csv.reader(io.StringIO(csv_text)))[1:]
    values = {(r[0], r[1], r[2]): r[3] for r in rows}
    assert values[("ASR", "CER", "all")] == "0.00"
    assert values[("SER", "ACC", "all")] == "100.00"


def test_hypothesis_tsv_escaping(tmp_path):
    hyps = {"a": "line1\nline2\tTAB \\ back", "b": "", "c": "普通<开始回答>答"}
    write_hypotheses(hyps, tmp_path / "h.tsv")
    assert read_hypotheses(tmp_path / "h.tsv") == hyps
    for s in ["", "\\", "\\n", "a\tb\r\n"]:
        assert unescape_field(escape_field(s)) == s
