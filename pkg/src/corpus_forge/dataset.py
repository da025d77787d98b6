"""MCV ingestion, NeMo-style manifests, duration-bucketed tar shards, stats."""
from __future__ import annotations

import csv
import io
import json
import logging
import tarfile
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath

import numpy as np

from .textnorm import DEFAULT_RULES, DropKind, DropReason, NormalizationRules, normalize_text

log = logging.getLogger(__name__)

MANIFEST_KEYS = ("audio_filepath", "text", "duration")


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    audio_filepath: str
    text: str
    duration: float

    def __post_init__(self) -> None:
        if not self.duration > 0:
            raise ValueError(f"{self.audio_filepath}: duration must be positive")
        if not self.text:
            raise ValueError(f"{self.audio_filepath}: text must not be empty")
        object.__setattr__(self, "duration", round(float(self.duration), 3))

    def to_json(self) -> str:
        return json.dumps(
            {"audio_filepath": self.audio_filepath, "text": self.text, "duration": self.duration},
            ensure_ascii=False,
        )


def write_manifest(entries: Iterable[ManifestEntry], path: str | Path, base_dir: str | Path | None = None) -> None:
    """One JSON object per line. With ``base_dir``, every audio file must exist."""
    lines = []
    for e in entries:
        if base_dir is not None and not (Path(base_dir) / e.audio_filepath).is_file():
            raise FileNotFoundError(f"audio file missing for manifest entry: {e.audio_filepath}")
        lines.append(e.to_json() + "\n")
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out.append(ManifestEntry(str(rec["audio_filepath"]), str(rec["text"]), float(rec["duration"])))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ManifestError(f"{path}:{n}: unreadable manifest line ({exc})") from exc
    return out


# ------------------------------------------------------------------------ MCV


@dataclass(frozen=True)
class McvRow:
    path: str
    sentence: str
    up_votes: int
    age: str
    gender: str
    accent: str
    duration_s: float
    down_votes: int = 0


# accepted spellings per field: the MCV release headers and the Table-I style
_ALIASES = {
    "path": ("path", "Path"),
    "sentence": ("sentence", "Sentence"),
    "up_votes": ("up_votes", "Up Votes", "upvotes"),
    "down_votes": ("down_votes", "Down Votes"),
    "age": ("age", "Age"),
    "gender": ("gender", "Gender"),
    "accent": ("accents", "accent", "Accent"),
    "duration_s": ("duration", "Duration(s)", "duration_s", "Duration"),
}
_MANDATORY = ("path", "sentence", "duration_s")


def read_mcv_table(source: str | Path | io.TextIOBase) -> list[McvRow]:
    """Parse a tab-separated MCV split file with a header row."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", newline="") as fh:
            return read_mcv_table(fh)
    reader = csv.DictReader(source, delimiter="\t", quoting=csv.QUOTE_NONE)
    header = reader.fieldnames or []
    cols: dict[str, str] = {}
    for key, names in _ALIASES.items():
        for name in names:
            if name in header:
                cols[key] = name
                break
    for key in _MANDATORY:
        if key not in cols:
            raise KeyError(f"MCV table is missing mandatory column {_ALIASES[key][0]!r}")

    def get(rec, key, default=""):
        return rec.get(cols[key], default) if key in cols else default

    rows = []
    for rec in reader:
        rows.append(
            McvRow(
                path=get(rec, "path"),
                sentence=get(rec, "sentence"),
                up_votes=int(get(rec, "up_votes", "0") or 0),
                age=get(rec, "age"),
                gender=get(rec, "gender"),
                accent=get(rec, "accent"),
                duration_s=float(get(rec, "duration_s")),
                down_votes=int(get(rec, "down_votes", "0") or 0),
            )
        )
    return rows


@dataclass(frozen=True)
class IngestPolicy:
    train_splits: tuple[str, ...] = ("train", "dev", "other")
    eval_split: str = "test"
    ignore_validated: bool = True
    min_up_votes: int = 2
    clips_dir: str = "clips"
    audio_ext: str = ".wav"


@dataclass(frozen=True)
class DroppedRow:
    split: str
    path: str
    duration_s: float
    reason: DropReason


@dataclass
class IngestResult:
    train: list[ManifestEntry] = field(default_factory=list)
    eval: list[ManifestEntry] = field(default_factory=list)
    dropped: list[DroppedRow] = field(default_factory=list)

    @property
    def train_hours(self) -> float:
        return sum(e.duration for e in self.train) / 3600


def _clip_path(row_path: str, policy: IngestPolicy) -> str:
    stem = PurePosixPath(row_path).stem
    return str(PurePosixPath(policy.clips_dir) / f"{stem}{policy.audio_ext}")


def ingest_mcv(
    split_files: Mapping[str, str | Path | Sequence[McvRow]],
    policy: IngestPolicy = IngestPolicy(),
    rules: NormalizationRules = DEFAULT_RULES,
) -> IngestResult:
    """Combine the configured splits into train, keep the eval split apart.

    Rows are deduplicated by path, then by (normalized sentence, duration);
    every sentence goes through :func:`normalize_text`. Everything removed is
    listed in ``dropped``, so kept plus dropped durations add up to the input.
    """
    tables = {
        name: (read_mcv_table(src) if isinstance(src, (str, Path)) else list(src))
        for name, src in split_files.items()
    }
    missing = [s for s in (*policy.train_splits, policy.eval_split) if s not in tables]
    if missing:
        log.info("splits not provided: %s", ", ".join(missing))

    result = IngestResult()

    def take(split: str, target: list[ManifestEntry], seen_paths: set, seen_keys: set) -> None:
        for row in tables.get(split, ()):
            if row.path in seen_paths:
                log.info("duplicate path %s in split %s; kept once", row.path, split)
                result.dropped.append(
                    DroppedRow(split, row.path, row.duration_s, DropReason(DropKind.DUPLICATE, "path"))
                )
                continue
            seen_paths.add(row.path)
            if not policy.ignore_validated and row.up_votes - row.down_votes < policy.min_up_votes:
                result.dropped.append(
                    DroppedRow(split, row.path, row.duration_s, DropReason(DropKind.CORRUPTED, "not validated"))
                )
                continue
            text = normalize_text(row.sentence, rules)
            if isinstance(text, DropReason):
                result.dropped.append(DroppedRow(split, row.path, row.duration_s, text))
                continue
            key = (text, round(row.duration_s, 2))
            if key in seen_keys:
                result.dropped.append(
                    DroppedRow(split, row.path, row.duration_s, DropReason(DropKind.DUPLICATE, "sentence+duration"))
                )
                continue
            seen_keys.add(key)
            target.append(ManifestEntry(_clip_path(row.path, policy), text, row.duration_s))

    paths: set = set()
    keys: set = set()
    for split in policy.train_splits:
        take(split, result.train, paths, keys)
    take(policy.eval_split, result.eval, set(), set())
    for d in result.dropped:
        log.debug("dropped %s/%s: %s", d.split, d.path, d.reason)
    return result


# --------------------------------------------------------------------- shards


@dataclass(frozen=True)
class BucketSpec:
    boundaries: tuple[float, ...] = (3.0, 6.0, 9.0, 12.0, 15.0)
    shard_size: int = 1000

    def __post_init__(self) -> None:
        b = tuple(float(x) for x in self.boundaries)
        if len(b) < 2 or any(x >= y for x, y in zip(b, b[1:])):
            raise ValueError("bucket boundaries must be strictly ascending with at least two edges")
        if self.shard_size < 1:
            raise ValueError("shard_size must be >= 1")
        object.__setattr__(self, "boundaries", b)

    def bucket_of(self, duration: float) -> int | None:
        """Index of the ``[lo, hi)`` bucket holding ``duration``, else ``None``."""
        i = int(np.searchsorted(self.boundaries, duration, side="right")) - 1
        return i if 0 <= i < len(self.boundaries) - 1 else None

    def bucket_name(self, i: int) -> str:
        return f"bucket_{self.boundaries[i]:g}s_{self.boundaries[i + 1]:g}s"


@dataclass(frozen=True)
class ShardInfo:
    path: str
    bucket: str
    entries: int
    total_s: float


@dataclass
class ShardReport:
    shards: list[ShardInfo] = field(default_factory=list)
    overflow: list[ManifestEntry] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "shards": [s.__dict__ for s in self.shards],
            "overflow": [json.loads(e.to_json()) for e in self.overflow],
        }


def _tar_add_bytes(tar: tarfile.TarFile, name: str, data: bytes) -> None:
    info = tarfile.TarInfo(name)
    info.size = len(data)
    info.mtime = 0
    info.mode = 0o644
    tar.addfile(info, io.BytesIO(data))


def _member_names(entries: Sequence[ManifestEntry]) -> list[str]:
    names, used = [], set()
    for e in entries:
        p = PurePosixPath(e.audio_filepath)
        name, n = p.name, 1
        while name in used:
            name = f"{p.stem}-{n}{p.suffix}"
            n += 1
        used.add(name)
        names.append(name)
    return names


def _write_shard(path: Path, entries: Sequence[ManifestEntry], base_dir: Path) -> None:
    names = _member_names(entries)
    path.parent.mkdir(parents=True, exist_ok=True)
    with tarfile.open(path, "w", format=tarfile.USTAR_FORMAT) as tar:
        for e, name in zip(entries, names):
            _tar_add_bytes(tar, name, (base_dir / e.audio_filepath).read_bytes())
        manifest = "".join(
            ManifestEntry(name, e.text, e.duration).to_json() + "\n" for e, name in zip(entries, names)
        )
        _tar_add_bytes(tar, "manifest.jsonl", manifest.encode("utf-8"))


def shard_tar(
    entries: Sequence[ManifestEntry],
    spec: BucketSpec,
    out_dir: str | Path,
    base_dir: str | Path = ".",
    jobs: int = 1,
) -> ShardReport:
    """Write ``bucket_<lo>s_<hi>s/shard_<n>.tar`` archives, one writer per bucket.

    Entries keep their manifest order within a bucket. Durations outside every
    bucket go to ``overflow`` instead of being written.
    """
    out_dir, base_dir = Path(out_dir), Path(base_dir)
    buckets: dict[int, list[ManifestEntry]] = {}
    report = ShardReport()
    for e in entries:
        b = spec.bucket_of(e.duration)
        if b is None:
            log.warning("%s: duration %.3f s outside all buckets", e.audio_filepath, e.duration)
            report.overflow.append(e)
        else:
            buckets.setdefault(b, []).append(e)

    def write_bucket(b: int) -> list[ShardInfo]:
        items = buckets[b]
        infos = []
        for n, start in enumerate(range(0, len(items), spec.shard_size)):
            part = items[start : start + spec.shard_size]
            rel = PurePosixPath(spec.bucket_name(b)) / f"shard_{n:05d}.tar"
            _write_shard(out_dir / rel, part, base_dir)
            infos.append(ShardInfo(str(rel), spec.bucket_name(b), len(part), round(sum(e.duration for e in part), 3)))
        return infos

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        for infos in pool.map(write_bucket, sorted(buckets)):
            report.shards.extend(infos)
    return report


# ---------------------------------------------------------------------- stats


@dataclass(frozen=True)
class DurationStats:
    count: int
    total_hours: float
    mean_s: float
    p50: float
    p95: float
    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]

    def as_dict(self) -> dict:
        return {
            "count": self.count,
            "total_hours": self.total_hours,
            "mean_s": self.mean_s,
            "p50": self.p50,
            "p95": self.p95,
            "histogram": {"bin_edges": list(self.bin_edges), "counts": list(self.counts)},
        }


def duration_stats(entries: Iterable[ManifestEntry | float], bin_width_s: float = 1.0) -> DurationStats:
    d = np.array([e.duration if isinstance(e, ManifestEntry) else float(e) for e in entries], dtype=np.float64)
    if d.size == 0:
        raise ValueError("no durations to summarise")
    if bin_width_s <= 0:
        raise ValueError("bin_width_s must be positive")
    lo = np.floor(d.min() / bin_width_s) * bin_width_s
    n_bins = max(1, int(np.ceil((d.max() - lo) / bin_width_s + 1e-12)))
    if lo + n_bins * bin_width_s <= d.max():
        n_bins += 1
    edges = lo + bin_width_s * np.arange(n_bins + 1)
    counts, _ = np.histogram(d, bins=edges)
    return DurationStats(
        count=int(d.size),
        total_hours=float(d.sum() / 3600),
        mean_s=float(d.mean()),
        p50=float(np.percentile(d, 50)),
        p95=float(np.percentile(d, 95)),
        bin_edges=tuple(float(x) for x in edges),
        counts=tuple(int(c) for c in counts),
    )
