"""JSON run configuration for the CLI pipeline."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .coding import SccConfig
from .errors import ConfigError
from .patches import SamplingConfig
from .synth import SynthConfig

SCHEMA_VERSION = 1
STAGE_IDS = {"synth": 1, "sample": 2, "train": 3, "features": 4, "classify": 5}


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "synthetic"
    data_dir: str | None = None
    synth: SynthConfig = field(default_factory=SynthConfig)
    sampling: SamplingConfig = field(default_factory=lambda: SamplingConfig(target_patch_count=200, patch_dim=60))
    smoothing_iterations: int = 0
    smoothing_step: float = 0.5
    scc: SccConfig = field(default_factory=lambda: SccConfig(lam=round(1.2 / np.sqrt(60), 4)))
    n_atoms: int = 200
    pooling: str = "max"
    classifier_rounds: int = 100
    rounds_grid: tuple[int, ...] = (25, 50, 100)
    cv_protocol: str = "kfold"
    cv_folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.pooling not in ("max", "abs"):
            raise ConfigError(f"pooling must be 'max' or 'abs', got {self.pooling!r}")
        if self.cv_protocol not in ("kfold", "nested"):
            raise ConfigError(f"cv_protocol must be 'kfold' or 'nested', got {self.cv_protocol!r}")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be >= 2")
        if self.n_atoms < 1 or self.classifier_rounds < 1:
            raise ConfigError("n_atoms and classifier_rounds must be >= 1")
        if self.smoothing_iterations < 0 or not 0 < self.smoothing_step <= 1:
            raise ConfigError("smoothing_iterations >= 0 and 0 < smoothing_step <= 1 required")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def with_seed(self, seed) -> "RunConfig":
        return self if seed is None else replace(self, seed=int(seed))

    def to_json(self) -> dict:
        doc = {"schema_version": SCHEMA_VERSION}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "scc":
                v = {("lambda" if k == "lam" else k): x for k, x in asdict(v).items() if k != "seed"}
            elif f.name in ("synth", "sampling"):
                v = {k: x for k, x in asdict(v).items() if k != "seed"}
            elif isinstance(v, tuple):
                v = list(v)
            doc[f.name] = v
        return doc

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_json(), sort_keys=True).encode()).hexdigest()

    def stage_seed(self, stage: str) -> int:
        """Independent per-stage seed derived from the root seed."""
        return int(np.random.SeedSequence([self.seed, STAGE_IDS[stage]]).generate_state(1, np.uint64)[0])


def _sub(cls, doc, name, **extra):
    if doc is None:
        return None
    if not isinstance(doc, dict):
        raise ConfigError(f"{name} must be an object")
    known = {f.name for f in fields(cls)}
    doc = dict(doc)
    if cls is SccConfig and "lambda" in doc:
        doc["lam"] = doc.pop("lambda")
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name}: {sorted(unknown)}")
    if "effect_center" in doc:
        doc["effect_center"] = tuple(doc["effect_center"])
    try:
        return cls(**doc, **extra)
    except TypeError as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def config_from_json(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    doc = dict(doc)
    version = doc.pop("schema_version", None)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kw = {}
    for key, cls in (("synth", SynthConfig), ("sampling", SamplingConfig), ("scc", SccConfig)):
        if key in doc:
            kw[key] = _sub(cls, doc.pop(key), key)
    if "rounds_grid" in doc:
        doc["rounds_grid"] = tuple(int(r) for r in doc["rounds_grid"])
    try:
        return RunConfig(**doc, **kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_json(doc)
