import json

import pytest

from asrx.cli import main
from asrx.corpus import UtteranceRecord, load_manifest, write_manifest
from asrx.grammar import TaskKind

import gen


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def _sgc_manifest(path, n=6):
    recs = [UtteranceRecord(f"g{i}", "a.wav", 1.0, "CN", TaskKind.SGC, "帮我调大声音", tag="male" if i % 2 else "female") for i in range(n)]
    write_manifest(recs, path)
    return recs


def test_score_identical_outputs(tmp_path, capsys):
    recs = _sgc_manifest(tmp_path / "r.jsonl")
    (tmp_path / "h.tsv").write_text("".join(f"{r.id}\t{r.transcript}<{r.tag.upper()}>\n" for r in recs), encoding="utf-8")
    code, out, _ = run(capsys, "score", "--task", "sgc", "--ref", tmp_path / "r.jsonl", "--hyp", tmp_path / "h.tsv")
    assert code == 0
    assert "ACC" in out and "100.00" in out


def test_score_json_and_files(tmp_path, capsys):
    _sgc_manifest(tmp_path / "r.jsonl")
    (tmp_path / "h.tsv").write_text("g0\tx<MALE>\ng1\tx<MALE>\n", encoding="utf-8")
    code, out, _ = run(capsys, "score", "--root", tmp_path, "--task", "SGC", "--ref", "r.jsonl", "--hyp", "h.tsv",
                       "--out-csv", "s.csv", "--out-text", "s.txt", "--json")
    summary = json.loads(out)
    assert code == 0 and summary["value"] == 0.5 and summary["items"] == 2
    assert len(summary["missing_ids"]) == 4
    assert (tmp_path / "s.csv").read_text().startswith("task,metric")


def test_balance_sap(tmp_path, capsys):
    recs = []
    for label, n in {"child": 12, "adult": 9, "old": 9}.items():
        recs += [UtteranceRecord(f"{label}{i}", "a.wav", 1.0, "CN", TaskKind.SAP, "t", tag=label) for i in range(n)]
    write_manifest(recs, tmp_path / "m.jsonl")
    code, out, _ = run(capsys, "balance", "--root", tmp_path, "--task", "sap", "--manifest", "m.jsonl", "--out", "b.jsonl", "--seed", 1)
    assert code == 0 and out.split() == ["child=9", "adult=9", "old=9"]
    assert len(load_manifest(tmp_path / "b.jsonl")) == 27


def test_randomized_commands_need_seed(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main(["balance", "--task", "sap", "--manifest", "m.jsonl", "--out", "b.jsonl"])
    assert e.value.code == 2


def test_usage_error_exit_2(capsys):
    with pytest.raises(SystemExit) as e:
        main(["score", "--task", "nope", "--ref", "r", "--hyp", "h"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2


def test_validate_strict_exit_codes(tmp_path, capsys):
    (tmp_path / "m.jsonl").write_text(json.dumps({"id": "a", "audio": "a", "duration": 1, "language": "CN", "task": "SER", "transcript": "x"}) + "\n")
    assert run(capsys, "validate", "--manifest", tmp_path / "m.jsonl")[0] == 0
    code, _, err = run(capsys, "validate", "--strict", "--manifest", tmp_path / "m.jsonl")
    assert code == 1 and "tag" in err


def test_missing_file_is_error_1(tmp_path, capsys):
    code, _, err = run(capsys, "stats", "--manifest", tmp_path / "nope.jsonl")
    assert code == 1 and "nope.jsonl" in err


def test_intersect(tmp_path, capsys):
    (tmp_path / "a.tsv").write_text("1\tsad\n2\thappy\n3\tfear\n", encoding="utf-8")
    (tmp_path / "b.tsv").write_text("1\tsad\n2\tanger\n4\tfear\n", encoding="utf-8")
    code, out, _ = run(capsys, "intersect", "--root", tmp_path, "--task", "ser", "--a", "a.tsv", "--b", "b.tsv", "--out", "c.tsv", "--json")
    assert code == 0 and json.loads(out)["kept"] == 1
    assert (tmp_path / "c.tsv").read_text(encoding="utf-8") == "1\tsad\n"


def test_stats_outputs(tmp_path, capsys):
    _sgc_manifest(tmp_path / "m.jsonl", n=3600)
    code, out, _ = run(capsys, "stats", "--root", tmp_path, "--manifest", "m.jsonl", "--out-csv", "s.csv")
    assert code == 0 and "SGC" in out
    assert "task,SGC,1.0" in (tmp_path / "s.csv").read_text()


def _pipeline(capsys, root, workers=1):
    manifest = "asr.jsonl"
    common = ["--root", root, "--seed", 5, "--workers", workers]
    assert run(capsys, "insert-events", *common, "--manifest", manifest, "--events-dir", "events",
               "--out-manifest", "out/ved.jsonl", "--out-audio-dir", "out/ved_wav")[0] == 0
    assert run(capsys, "add-noise", *common, "--manifest", manifest, "--noise-dir", "noise",
               "--snr-min", 5, "--snr-max", 20, "--out-manifest", "out/noisy.jsonl", "--out-audio-dir", "out/noisy_wav")[0] == 0
    assert run(capsys, "build", *common, "--manifest", "out/ved.jsonl", "--out", "out/train.jsonl")[0] == 0
    assert run(capsys, "mix", *common, "--source", "out/ved.jsonl::1", "--source", f"{manifest}:asr:2",
               "--out", "out/mix.jsonl")[0] == 0
    return {p.relative_to(root): p.read_bytes() for p in sorted((root / "out").rglob("*")) if p.is_file()}


def test_pipeline_rerun_is_byte_identical(tmp_path, capsys):
    outputs = []
    for attempt in range(2):
        root = tmp_path / f"run{attempt}"
        gen.make_audio_corpus(root, 40, seed=1)
        outputs.append(_pipeline(capsys, root, workers=1 + 2 * attempt))
    assert outputs[0] == outputs[1]
    ved = load_manifest(tmp_path / "run0" / "out" / "ved.jsonl")
    assert len(ved) == 40 and all(r.task is TaskKind.VED for r in ved)
    assert len((tmp_path / "run0" / "out" / "mix.jsonl").read_text(encoding="utf-8").splitlines()) == 80


def test_judge_command(tmp_path, capsys, mock_judge):
    m = mock_judge(lambda req: "Score: 6")
    recs = [UtteranceRecord(f"c{i}", "a.wav", 1.0, "CN", TaskKind.STTC, "我感觉不太满意", response="抱歉，我们会让你满意的。") for i in range(4)]
    write_manifest(recs, tmp_path / "r.jsonl")
    (tmp_path / "h.tsv").write_text("".join(f"c{i}\t我感觉不太满意<开始回答>好的\n" for i in range(4)), encoding="utf-8")
    code, out, _ = run(capsys, "judge", "--root", tmp_path, "--ref", "r.jsonl", "--hyp", "h.tsv", "--endpoint", m.url,
                       "--model", "mock", "--out", "scores.tsv", "--json")
    assert code == 0 and json.loads(out)["mean"] == 6.0
    assert (tmp_path / "scores.tsv").read_text().count("\t6") == 4
