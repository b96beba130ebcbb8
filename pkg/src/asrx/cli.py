"""Command-line entry point: ``asrx <subcommand> ...``.

Exit status is 0 on success, 1 when a strict validation fails or an
operation errors, 2 on usage errors. Logs go to stderr; data goes to the
files named by the flags. All relative paths resolve against ``--root``.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .augment import intersect_annotations, read_annotations, write_annotations
from .corpus import (
    MixSource,
    MixSpec,
    PromptPool,
    build_training_example,
    balance_classes,
    corpus_stats,
    load_manifest,
    load_sources,
    mix_records,
    validate_manifest,
    write_manifest,
)
from .errors import AsrxError
from .grammar import VOCAB, TaskKind
from .judge import JudgeClient, JudgeConfig, items_from_run, judge_items
from .pipeline import add_noise_batch, build_examples, insert_events_batch
from .scoring import ScoreReport, read_hypotheses, render_report, score_run

log = logging.getLogger("asrx")

RANDOMIZED = {"build", "mix", "balance", "insert-events", "add-noise"}


class UsageError(Exception):
    pass


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, help="global seed (required by randomized subcommands)")
    g.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
    g.add_argument("--strict", action="store_true", help="fail on the first invalid manifest row")
    g.add_argument("--config", help="JSON config with 'prompts' and/or 'judge' sections")
    g.add_argument("--root", default=".", help="base directory for relative paths")
    g.add_argument("--json", action="store_true", help="print a JSON summary to stdout")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="asrx", description="ASR+X corpus construction and scoring toolkit")
    parser.add_argument("--version", action="version", version=f"asrx {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check a manifest")
    p.add_argument("--manifest", required=True)

    p = sub.add_parser("stats", parents=[common], help="hours per task, class and language")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-text")
    p.add_argument("--out-csv")

    p = sub.add_parser("build", parents=[common], help="turn a manifest into prompt/target training examples")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--prompts", help="prompt pool JSON (default: bundled pool)")

    p = sub.add_parser("mix", parents=[common], help="weighted, seeded interleave of several manifests")
    p.add_argument("--source", action="append", required=True, metavar="PATH[:TASK[:WEIGHT]]")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--prompts")

    p = sub.add_parser("balance", parents=[common], help="down-sample classes to equal counts")
    p.add_argument("--task", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("insert-events", parents=[common], help="build VED data by splicing event clips into ASR audio")
    p.add_argument("--manifest", required=True)
    p.add_argument("--events-dir", required=True, help="directory laid out as <class>/*.wav")
    p.add_argument("--out-manifest", required=True)
    p.add_argument("--out-audio-dir", required=True)

    p = sub.add_parser("add-noise", parents=[common], help="noise-augment audio at a random SNR")
    p.add_argument("--manifest", required=True)
    p.add_argument("--noise-dir", required=True)
    p.add_argument("--snr-min", type=float, required=True)
    p.add_argument("--snr-max", type=float, required=True)
    p.add_argument("--out-manifest", required=True)
    p.add_argument("--out-audio-dir", required=True)

    p = sub.add_parser("intersect", parents=[common], help="keep labels two annotators agree on")
    p.add_argument("--task", required=True)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("score", parents=[common], help="score a hypothesis file against a reference manifest")
    p.add_argument("--task", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--out-text")
    p.add_argument("--out-csv")

    p = sub.add_parser("judge", parents=[common], help="score STTC answers with an LLM judge")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--endpoint")
    p.add_argument("--model")
    p.add_argument("--timeout", type=float)
    p.add_argument("--retries", type=int)
    p.add_argument("--in-flight", type=int)
    p.add_argument("--cache")
    p.add_argument("--out", help="per-item scores as TSV")
    return parser


def _path(args, p: str) -> Path:
    return Path(args.root) / p


def _config(args) -> dict:
    if not args.config:
        return {}
    return json.loads(_path(args, args.config).read_text(encoding="utf-8"))


def _pool(args) -> PromptPool:
    if getattr(args, "prompts", None):
        return PromptPool.load(_path(args, args.prompts))
    cfg = _config(args).get("prompts")
    if isinstance(cfg, str):
        return PromptPool.load(_path(args, cfg))
    if isinstance(cfg, dict):
        return PromptPool.from_dict(cfg)
    return PromptPool.load()


def _task(value: str) -> TaskKind:
    try:
        return TaskKind.coerce(value)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _load(args, path: str):
    return load_manifest(_path(args, path), strict=args.strict)


def _write_lines(path: Path, lines) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(line)
            f.write("\n")
            n += 1
    return n


def cmd_validate(args) -> tuple[int, dict]:
    report = validate_manifest(_path(args, args.manifest))
    for v in report.violations:
        log.warning("%s: %s", args.manifest, v)
    log.info("%s: %d rows, %d valid, %d violations", args.manifest, report.rows, report.valid, len(report.violations))
    return (1 if args.strict and not report.ok else 0), report.summary()


def cmd_stats(args) -> tuple[int, dict]:
    stats = corpus_stats(_load(args, args.manifest))
    text = stats.to_text()
    if args.out_text:
        _path(args, args.out_text).write_text(text, encoding="utf-8")
    if args.out_csv:
        _path(args, args.out_csv).write_text(stats.to_csv(), encoding="utf-8")
    if not args.json:
        sys.stdout.write(text)
    return 0, {"total_hours": stats.total_hours, "hours_by_task": {k: v / 3600 for k, v in stats.seconds_by_task.items()}}


def cmd_build(args) -> tuple[int, dict]:
    records = _load(args, args.manifest)
    examples = build_examples(records, _pool(args), args.seed, args.workers)
    n = _write_lines(_path(args, args.out), (e.to_json() for e in examples))
    return 0, {"examples": n}


def _parse_source(text: str) -> MixSource:
    parts = text.split(":")
    if len(parts) > 3 or not parts[0]:
        raise UsageError(f"bad --source {text!r}; expected PATH[:TASK[:WEIGHT]]")
    task = _task(parts[1]) if len(parts) > 1 and parts[1] else None
    weight = None
    if len(parts) == 3 and parts[2]:
        try:
            weight = float(parts[2])
        except ValueError:
            raise UsageError(f"bad weight in --source {text!r}") from None
    return MixSource(parts[0], task, weight)


def cmd_mix(args) -> tuple[int, dict]:
    sources = tuple(_parse_source(s) for s in args.source)
    sources = tuple(MixSource(str(_path(args, s.path)), s.task, s.weight) for s in sources)
    try:
        spec = MixSpec(sources, args.seed, args.epochs)
    except ValueError as e:
        raise UsageError(str(e)) from None
    pool = _pool(args)
    loaded = load_sources(spec)
    counts = [0] * len(loaded)

    def lines():
        for i, rec in mix_records(loaded, spec.seed, spec.epochs):
            counts[i] += 1
            yield build_training_example(rec, pool, spec.seed).to_json()

    n = _write_lines(_path(args, args.out), lines())
    return 0, {"examples": n, "per_source": counts}


def cmd_balance(args) -> tuple[int, dict]:
    task = _task(args.task)
    records = _load(args, args.manifest)
    kept = balance_classes(records, task, seed=args.seed)
    write_manifest(kept, _path(args, args.out))
    counts = {label: 0 for label in VOCAB[task]}
    for r in kept:
        counts[r.tag] += 1
    if not args.json:
        print(" ".join(f"{k}={v}" for k, v in counts.items()))
    return 0, {"kept": len(kept), "input": len(records), "class_counts": counts}


def cmd_insert_events(args) -> tuple[int, dict]:
    records = _load(args, args.manifest)
    out = insert_events_batch(
        records, root=args.root, events_dir=args.events_dir, out_dir=args.out_audio_dir, seed=args.seed, workers=args.workers
    )
    write_manifest(out, _path(args, args.out_manifest))
    return 0, {"records": len(out)}


def cmd_add_noise(args) -> tuple[int, dict]:
    records = _load(args, args.manifest)
    out = add_noise_batch(
        records,
        root=args.root,
        noise_dir=args.noise_dir,
        out_dir=args.out_audio_dir,
        snr_range=(args.snr_min, args.snr_max),
        seed=args.seed,
        workers=args.workers,
    )
    write_manifest(out, _path(args, args.out_manifest))
    return 0, {"records": len(out)}


def cmd_intersect(args) -> tuple[int, dict]:
    task = _task(args.task)
    a = read_annotations(_path(args, args.a), task)
    b = read_annotations(_path(args, args.b), task)
    both = intersect_annotations(a, b)
    write_annotations(both, _path(args, args.out))
    return 0, {"a": len(a.labels), "b": len(b.labels), "kept": len(both.labels)}


def cmd_score(args) -> tuple[int, dict]:
    task = _task(args.task)
    report = score_run(_load(args, args.ref), read_hypotheses(_path(args, args.hyp)), task)
    if report.missing_ids:
        log.warning("%d reference ids have no hypothesis", len(report.missing_ids))
    text, csv_text = render_report([report])
    if args.out_text:
        _path(args, args.out_text).write_text(text, encoding="utf-8")
    if args.out_csv:
        _path(args, args.out_csv).write_text(csv_text, encoding="utf-8")
    if not args.json:
        sys.stdout.write(text)
    return 0, report.summary()


def cmd_judge(args) -> tuple[int, dict]:
    cfg_dict = dict(_config(args).get("judge", {}))
    for flag, key in (("endpoint", "endpoint"), ("model", "model"), ("timeout", "timeout"),
                      ("retries", "max_retries"), ("in_flight", "max_in_flight"), ("cache", "cache_path")):
        value = getattr(args, flag)
        if value is not None:
            cfg_dict[key] = str(_path(args, value)) if key == "cache_path" else value
    if "endpoint" not in cfg_dict or "model" not in cfg_dict:
        raise UsageError("judge needs --endpoint and --model (or a 'judge' config section)")
    try:
        cfg = JudgeConfig.from_dict(cfg_dict)
    except ValueError as e:
        raise UsageError(str(e)) from None
    items = items_from_run(_load(args, args.ref), read_hypotheses(_path(args, args.hyp)))
    summary = judge_items(items, cfg, JudgeClient(cfg))
    if args.out:
        _write_lines(_path(args, args.out), (f"{k}\t{v}" for k, v in sorted(summary.scores.items())))
    report = ScoreReport(TaskKind.STTC, "JUDGE", summary.mean, len(summary.scores), unparseable=len(summary.unparseable))
    if not args.json:
        sys.stdout.write(render_report([report])[0])
    return 0, {"mean": summary.mean, "scored": len(summary.scores),
               "unparseable": summary.unparseable, "failed": summary.failed}


COMMANDS = {
    "validate": cmd_validate,
    "stats": cmd_stats,
    "build": cmd_build,
    "mix": cmd_mix,
    "balance": cmd_balance,
    "insert-events": cmd_insert_events,
    "add-noise": cmd_add_noise,
    "intersect": cmd_intersect,
    "score": cmd_score,
    "judge": cmd_judge,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.DEBUG if args.verbose else logging.INFO)
    try:
        return _dispatch(parser, args)
    finally:
        log.removeHandler(handler)


def _dispatch(parser: argparse.ArgumentParser, args) -> int:
    if args.command in RANDOMIZED and args.seed is None:
        parser.error(f"{args.command} needs --seed")
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    try:
        code, summary = COMMANDS[args.command](args)
    except UsageError as e:
        parser.error(str(e))
    except (AsrxError, OSError, ValueError) as e:
        log.error("%s: %s", args.command, e)
        return 1
    if args.json:
        print(json.dumps(summary, ensure_ascii=False, sort_keys=True, default=str))
    return code


if __name__ == "__main__":
    sys.exit(main())
