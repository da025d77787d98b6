"""``corpus-forge`` command line.

Every subcommand writes ``report.jsonl`` into its output directory. The first
record is the effective config; later records are per-item results and a
closing summary. Exit status: 0 success, 1 hard error, 2 finished with drops.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import os
import subprocess
import sys
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path, PurePosixPath

import numpy as np

from . import audio as au
from .config import PipelineConfig, load_config
from .dataset import (
    ManifestEntry,
    duration_stats,
    read_manifest,
    read_mcv_table,
    shard_tar,
    write_manifest,
)
from .segmenter import attach_punctuation, format_report_line, parse_ctm, run_pipeline
from .synth import corrupt_hypothesis, synth_sentences
from .textnorm import DropKind, DropReason, expressiveness_filter, normalize_text, strip_colons
from .vac import ChunkPrediction, benchmark_merged, match_transcript, read_hypotheses

log = logging.getLogger("corpus_forge")

EXIT_OK, EXIT_ERROR, EXIT_DROPS = 0, 1, 2


class Report:
    """JSON-lines report; the config record always comes first."""

    def __init__(self, command: str, config: PipelineConfig, inputs: dict):
        self.records: list[dict] = [{"record": "config", "command": command, "inputs": inputs, "config": config.to_dict()}]

    def add(self, record: str, /, **fields) -> None:
        self.records.append({"record": record, **fields})

    def write(self, path: Path) -> None:
        text = "".join(json.dumps(r, ensure_ascii=False, sort_keys=True, allow_nan=False) + "\n" for r in self.records)
        path.write_text(text, encoding="utf-8")


def _finite(x: float) -> float | None:
    return None if x is None or not math.isfinite(x) else round(float(x), 6)


def _load_audio(path: str, cfg: PipelineConfig) -> au.AudioBuffer:
    buf = au.read_wav(path)
    return au.resample(buf, cfg.sample_rate) if buf.sample_rate != cfg.sample_rate else buf


def _drop_record(report: Report, item: str, reason: DropReason) -> None:
    report.add("drop", item=item, kind=reason.kind.value, detail=reason.detail)


# ------------------------------------------------------------------ commands


def cmd_normalize(args, cfg: PipelineConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = Report("normalize", cfg, {"input": Path(args.input).name, "mcv": args.mcv, "strip_colons": args.strip_colons})
    drops = 0
    if args.mcv:
        rows = read_mcv_table(args.input)
        items = [(r.path, r.sentence) for r in rows]
    else:
        with open(args.input, encoding="utf-8", errors="surrogateescape") as fh:
            items = [(str(n), line.rstrip("\n")) for n, line in enumerate(fh, 1)]
    kept = []
    for key, raw in items:
        try:
            text = normalize_text(raw, cfg.textnorm)
        except UnicodeError as exc:
            text = DropReason(DropKind.CORRUPTED, f"undecodable text ({exc.__class__.__name__})")
        if isinstance(text, DropReason):
            _drop_record(report, key, text)
            drops += 1
            continue
        if args.strip_colons:
            text, _ = strip_colons(text, cfg.textnorm)
        kept.append((key, text))
    if args.mcv:
        buf = io.StringIO()
        w = csv.writer(buf, delimiter="\t", lineterminator="\n", quoting=csv.QUOTE_NONE, escapechar="\\")
        w.writerow(["path", "sentence"])
        w.writerows(kept)
        (out / "normalized.tsv").write_text(buf.getvalue(), encoding="utf-8")
    else:
        (out / "normalized.txt").write_text("".join(t + "\n" for _, t in kept), encoding="utf-8")
    report.add("summary", kept=len(kept), dropped=drops)
    report.write(out / "report.jsonl")
    return EXIT_DROPS if drops else EXIT_OK


def cmd_segment_ctm(args, cfg: PipelineConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    buf = _load_audio(args.wav, cfg)
    with open(args.ctm, encoding="utf-8") as fh:
        words = parse_ctm(fh)
    if not words:
        raise ValueError(f"{args.ctm}: no words")
    if args.transcript:
        words = attach_punctuation(words, Path(args.transcript).read_text(encoding="utf-8"))
    chunks = run_pipeline(words, buf, cfg.segmenter)
    stem = Path(args.wav).stem
    report = Report(
        "segment-ctm",
        cfg,
        {"wav": Path(args.wav).name, "ctm": Path(args.ctm).name, "transcript": args.transcript and Path(args.transcript).name},
    )
    entries, tsv = [], []
    for i, (seg, clip) in enumerate(chunks):
        name = f"{stem}_{i:04d}.wav"
        au.write_wav(out / name, clip, cfg.sample_rate)
        entries.append(ManifestEntry(name, seg.text, clip.duration_s))
        tsv.append(format_report_line(name, seg) + "\n")
        report.add(
            "chunk",
            file=name,
            start_s=round(seg.start_s, 6),
            end_s=round(seg.end_s, 6),
            emitted_s=seg.emitted_s,
            words=seg.word_count,
            flags=sorted(f.value for f in seg.flags),
            text=seg.text,
        )
    write_manifest(entries, out / "manifest.jsonl", base_dir=out)
    (out / "alignment.tsv").write_text("".join(tsv), encoding="utf-8")
    report.add("summary", chunks=len(chunks), words=len(words), total_s=round(sum(e.duration for e in entries), 3))
    report.write(out / "report.jsonl")
    return EXIT_OK


def _run_asr(template: tuple[str, ...], wav: Path) -> str:
    argv = [part.replace("{wav}", str(wav)) for part in template]
    res = subprocess.run(argv, capture_output=True, text=True, check=False)
    if res.returncode != 0:
        raise RuntimeError(f"ASR command failed on {wav.name} (exit {res.returncode}): {res.stderr.strip()[:200]}")
    return " ".join(res.stdout.split())


def cmd_vac_align(args, cfg: PipelineConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    buf = _load_audio(args.wav, cfg)
    transcript = Path(args.transcript).read_text(encoding="utf-8")
    vad_chunks = au.chunk_by_vad(buf, cfg.vad, cfg.chunk_min_s, cfg.chunk_max_s)
    stem = Path(args.wav).stem
    names = []
    for i, ch in enumerate(vad_chunks):
        name = f"{stem}_{i:04d}.wav"
        au.write_wav(out / name, buf.slice(ch.start_s, ch.end_s), cfg.sample_rate)
        names.append(name)

    if args.hyp:
        with open(args.hyp, encoding="utf-8") as fh:
            given = {c.index: c.hyp_text for c in read_hypotheses(fh)}
        extra = sorted(i for i in given if not 0 <= i < len(vad_chunks))
        if extra:
            raise ValueError(f"hypotheses for chunks {extra} but only {len(vad_chunks)} chunks were cut")
        hyps = [given.get(i, "") for i in range(len(vad_chunks))]
    elif cfg.asr_command:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            hyps = list(pool.map(lambda n: _run_asr(cfg.asr_command, out / n), names))
    else:
        raise ValueError("no hypothesis source: pass --hyp or set asr_command in the config")

    preds = [ChunkPrediction(i, h, (c.start_s, c.end_s)) for i, (h, c) in enumerate(zip(hyps, vad_chunks))]
    results = match_transcript(preds, transcript, cfg.vac)
    report = Report(
        "vac-align",
        cfg,
        {"wav": Path(args.wav).name, "transcript": Path(args.transcript).name, "hyp": args.hyp and Path(args.hyp).name},
    )
    entries = []
    for name, pred, res in zip(names, preds, results):
        report.add(
            "chunk",
            file=name,
            start_s=round(pred.audio_span[0], 6),
            end_s=round(pred.audio_span[1], 6),
            hyp=pred.hyp_text,
            status=res.status.value,
            cer=_finite(res.cer_value),
            words=list(res.source_span) if res.source_span else None,
            text=res.matched_text,
        )
        if res.accepted:
            entries.append(ManifestEntry(name, res.matched_text, pred.audio_span[1] - pred.audio_span[0]))
    write_manifest(entries, out / "manifest.jsonl", base_dir=out)
    (out / "alignment.tsv").write_text("".join(r.report_line() + "\n" for r in results), encoding="utf-8")
    rejected = sum(not r.accepted for r in results)
    report.add("summary", chunks=len(results), accepted=len(results) - rejected, rejected=rejected)
    report.write(out / "report.jsonl")
    return EXIT_DROPS if rejected else EXIT_OK


def _condition(entry: ManifestEntry, base: Path, cfg: PipelineConfig):
    """Volume, silence trimming and quality check for one manifest entry."""
    if not expressiveness_filter(entry.text, cfg.textnorm):
        return None, DropReason(DropKind.EXPRESSIVE, "too many expressive marks"), {}
    buf = _load_audio(str(base / entry.audio_filepath), cfg)
    try:
        # bring speech near the VAD threshold's scale before trimming, since a
        # quiet recording would otherwise look like one long silence
        buf, first = au.normalize_volume(buf, cfg.target_rms_db, cfg.vad, cfg.volume_tolerance_db)
        before = len(buf)
        buf = au.trim_silences(buf, cfg.vad, cfg.trim_max_gap_s, cfg.fade_ms)
        trimmed = (before - len(buf)) / buf.sample_rate
        buf, second = au.normalize_volume(buf, cfg.target_rms_db, cfg.vad, cfg.volume_tolerance_db)
    except au.SilentAudioError as exc:
        return None, DropReason(DropKind.CORRUPTED, str(exc)), {}
    bad = au.quality_check(buf, cfg.vad, cfg.quality)
    if bad is not None:
        return None, bad, {}
    info = {
        "input_db": _finite(first.input_db),
        "output_db": _finite(second.output_db),
        "gain_db": _finite(first.gain_db + second.gain_db),
        "trimmed_s": round(trimmed, 6),
    }
    return buf, None, info


def cmd_mix_prepare(args, cfg: PipelineConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = Report("mix-prepare", cfg, {"manifests": [Path(m).name for m in args.manifests]})
    jobs = []
    for k, m in enumerate(args.manifests):
        base = Path(m).parent
        for e in read_manifest(m):
            jobs.append((k, base, e))
    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        done = list(pool.map(lambda j: _condition(j[2], j[1], cfg), jobs))

    counts = Counter()
    levels: dict[int, list[float]] = {}
    entries = []
    for (k, _, e), (buf, reason, info) in zip(jobs, done):
        item = f"{k}:{e.audio_filepath}"
        if reason is not None:
            _drop_record(report, item, reason)
            counts[f"dropped_{reason.kind.value}"] += 1
            continue
        rel = str(PurePosixPath(f"src{k}") / e.audio_filepath)
        (out / rel).parent.mkdir(parents=True, exist_ok=True)
        au.write_wav(out / rel, buf, cfg.sample_rate)
        entries.append(ManifestEntry(rel, e.text, buf.duration_s))
        counts["trimmed"] += info["trimmed_s"] > 0
        counts["gain_applied"] += info["gain_db"] != 0
        levels.setdefault(k, []).append((info["input_db"], info["output_db"]))
        report.add("entry", item=item, file=rel, **info)
    write_manifest(entries, out / "manifest.jsonl", base_dir=out)
    per_source = {
        str(k): {
            "mean_input_db": round(float(np.mean([a for a, _ in v])), 3),
            "mean_output_db": round(float(np.mean([b for _, b in v])), 3),
        }
        for k, v in sorted(levels.items())
    }
    dropped = sum(v for key, v in counts.items() if key.startswith("dropped_"))
    report.add("summary", kept=len(entries), dropped=dropped, counts=dict(sorted(counts.items())), sources=per_source)
    report.write(out / "report.jsonl")
    return EXIT_DROPS if dropped else EXIT_OK


def cmd_benchmark_vac(args, cfg: PipelineConfig) -> int:
    if args.sentences:
        refs = [ln.strip() for ln in Path(args.sentences).read_text(encoding="utf-8").splitlines() if ln.strip()]
    else:
        refs = synth_sentences(args.synthetic, cfg.seed)
    noise = cfg.benchmark_noise if args.noise is None else args.noise
    pairs = [(r, corrupt_hypothesis(r, noise, cfg.seed + 1 + i)) for i, r in enumerate(refs)]
    stats, _ = benchmark_merged(pairs, cfg.vac, jobs=cfg.jobs)
    summary = {k: _finite(v) if isinstance(v, float) else v for k, v in stats.as_dict().items()}
    summary["noise"] = noise
    print(
        f"sentences={stats.n} exact={stats.exact_pct:.2f}% mean_wer={stats.mean_wer:.4f} "
        f"mean_cer={stats.mean_cer:.4f} rejected={stats.rejected_pct:.2f}%"
    )
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report = Report(
            "benchmark-vac", cfg, {"sentences": args.sentences and Path(args.sentences).name, "synthetic": args.synthetic}
        )
        report.add("summary", **summary)
        report.write(out / "report.jsonl")
    return EXIT_OK


def cmd_stats(args, cfg: PipelineConfig) -> int:
    stats = duration_stats(read_manifest(args.manifest), args.bin_width)
    print(json.dumps(stats.as_dict(), sort_keys=True))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report = Report("stats", cfg, {"manifest": Path(args.manifest).name, "bin_width_s": args.bin_width})
        report.add("summary", **stats.as_dict())
        report.write(out / "report.jsonl")
    return EXIT_OK


def cmd_shard(args, cfg: PipelineConfig) -> int:
    out = Path(args.out)
    entries = read_manifest(args.manifest)
    res = shard_tar(entries, cfg.buckets, out, base_dir=Path(args.manifest).parent, jobs=cfg.jobs)
    report = Report("shard", cfg, {"manifest": Path(args.manifest).name})
    for s in res.shards:
        report.add("shard", **dataclasses.asdict(s))
    for e in res.overflow:
        report.add("overflow", audio_filepath=e.audio_filepath, duration=e.duration)
    report.add("summary", shards=len(res.shards), entries=sum(s.entries for s in res.shards), overflow=len(res.overflow))
    report.write(out / "report.jsonl")
    return EXIT_DROPS if res.overflow else EXIT_OK


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config document")
    common.add_argument("--seed", type=int, help="override config seed")
    common.add_argument("--jobs", type=int, help="worker pool size")
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="override a config field, e.g. vac.cer_threshold=0.25 (repeatable)",
    )

    p = argparse.ArgumentParser(prog="corpus-forge", description="Build speech corpora from long recordings.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("normalize", parents=[common], help="clean transcripts")
    s.add_argument("input")
    s.add_argument("--out", required=True)
    s.add_argument("--mcv", action="store_true", help="input is an MCV tab-separated table")
    s.add_argument("--strip-colons", action="store_true", help="remove sentence colons for training text")
    s.set_defaults(func=cmd_normalize)

    s = sub.add_parser("segment-ctm", parents=[common], help="cut audio along word alignments")
    s.add_argument("wav")
    s.add_argument("ctm")
    s.add_argument("--transcript", help="punctuated transcript to restore marks the CTM lost")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_segment_ctm)

    s = sub.add_parser("vac-align", parents=[common], help="VAD chunking + ASR + transcript matching")
    s.add_argument("wav")
    s.add_argument("transcript")
    s.add_argument("--hyp", help="per-chunk hypotheses (index<TAB>text or JSON lines)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_vac_align)

    s = sub.add_parser("mix-prepare", parents=[common], help="condition and merge manifests")
    s.add_argument("manifests", nargs="+")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_mix_prepare)

    s = sub.add_parser("benchmark-vac", parents=[common], help="matcher accuracy on corrupted hypotheses")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--sentences", help="text file, one reference sentence per line")
    g.add_argument("--synthetic", type=int, help="generate this many synthetic sentences")
    s.add_argument("--noise", type=float, help="character noise rate (default from config)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_benchmark_vac)

    s = sub.add_parser("stats", parents=[common], help="duration histogram of a manifest")
    s.add_argument("manifest")
    s.add_argument("--bin-width", type=float, default=1.0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("shard", parents=[common], help="pack a manifest into duration-bucketed tars")
    s.add_argument("manifest")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_shard)
    return p


def _setup_logging() -> None:
    level = os.environ.get("CORPUS_FORGE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        overrides = list(args.overrides)
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        if args.jobs is not None:
            overrides.append(f"jobs={args.jobs}")
        cfg = load_config(args.config, overrides)
        return args.func(args, cfg)
    # parse, bounds and manifest errors all derive from ValueError
    except (OSError, ValueError, KeyError, TypeError, RuntimeError) as exc:
        log.error("%s: %s", args.command, exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
