"""One JSON document configuring every stage, with dotted-path overrides."""
from __future__ import annotations

import copy
import dataclasses
import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .audio import TARGET_RATE, QualityConfig, VadParams
from .dataset import BucketSpec, IngestPolicy
from .segmenter import SegmenterConfig
from .textnorm import DEFAULT_RULES, NormalizationRules
from .vac import VacConfig


@dataclass(frozen=True)
class PipelineConfig:
    textnorm: NormalizationRules = DEFAULT_RULES
    vad: VadParams = VadParams()
    segmenter: SegmenterConfig = SegmenterConfig()
    vac: VacConfig = VacConfig()
    buckets: BucketSpec = BucketSpec()
    quality: QualityConfig = QualityConfig()
    ingest: IngestPolicy = IngestPolicy()
    target_rms_db: float = -20.0
    volume_tolerance_db: float = 0.1
    sample_rate: int = TARGET_RATE
    trim_max_gap_s: float = 0.5
    fade_ms: float = 10.0
    chunk_min_s: float = 3.0
    chunk_max_s: float = 15.0
    benchmark_noise: float = 0.1
    seed: int = 0
    jobs: int = 1
    # argv template for an external recognizer; "{wav}" is replaced by the chunk path
    asr_command: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        # the segmenter shares the pipeline VAD settings
        if self.segmenter.vad != self.vad:
            object.__setattr__(self, "segmenter", dataclasses.replace(self.segmenter, vad=self.vad))
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    def to_dict(self) -> dict:
        d = _dump(self)
        d["textnorm"] = self.textnorm.to_dict()
        del d["segmenter"]["vad"]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        rules = NormalizationRules.from_dict(data.pop("textnorm", {}))
        seg = dict(data.pop("segmenter", {}))
        if "vad" in seg:
            raise KeyError("segmenter.vad is not configurable separately; set the top-level vad")
        cfg = _build(cls, data)
        return dataclasses.replace(cfg, textnorm=rules, segmenter=_build(SegmenterConfig, seg, base=cfg.segmenter))


def _dump(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj):
        return {f.name: _dump(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, frozenset):
        return sorted(obj)
    if isinstance(obj, (tuple, list)):
        return [_dump(x) for x in obj]
    return obj


def _build(cls: type, data: dict, base: Any = None) -> Any:
    """Instantiate dataclass ``cls`` from a mapping, coercing by the default's type."""
    base = base if base is not None else cls()
    kw = {}
    names = {f.name for f in dataclasses.fields(cls)}
    for key, value in data.items():
        if key not in names:
            raise KeyError(f"unknown config key {cls.__name__}.{key}")
        current = getattr(base, key)
        if dataclasses.is_dataclass(current):
            if not isinstance(value, dict):
                raise TypeError(f"{cls.__name__}.{key} expects an object")
            kw[key] = _build(type(current), value, base=current)
        elif isinstance(current, frozenset):
            kw[key] = frozenset(value)
        elif isinstance(current, tuple):
            kw[key] = tuple(value)
        elif isinstance(current, bool):
            if not isinstance(value, bool):
                raise TypeError(f"{cls.__name__}.{key} expects true/false")
            kw[key] = value
        elif isinstance(current, float) and isinstance(value, (int, float)):
            kw[key] = float(value)
        else:
            kw[key] = value
    return dataclasses.replace(base, **kw)


def merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in update.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = v
    return out


def parse_override(text: str) -> dict:
    """``a.b.c=value`` to a nested dict; the value is JSON when it parses as JSON."""
    path, sep, raw = text.partition("=")
    if not sep or not path:
        raise ValueError(f"override {text!r} is not of the form key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    out: dict = {}
    node = out
    keys = path.split(".")
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = value
    return out


def load_config(path: str | Path | None = None, overrides: list[str] | tuple[str, ...] = ()) -> PipelineConfig:
    data: dict = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError(f"{path}: config must be a JSON object")
    for o in overrides:
        data = merge(data, parse_override(o))
    return PipelineConfig.from_dict(data)

