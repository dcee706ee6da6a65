"""Pipeline configuration: defaults, JSON file, dotted overrides.

One global seed feeds every seeded stage. Validation errors name the
offending key with its dotted path.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

from .dedup import SimilarityConfig
from .errors import ConfigError
from .geo import Gazetteer
from .label import LabelingConfig
from .synth import SynthSpec

DEFAULTS: dict = {
    "seed": 0,
    "workdir": "out",
    "threads": 1,
    "corpus": {"path": None, "format": "jsonl", "annotations": None},
    "gazetteer": None,
    "dedup": {
        "shingle_k": 5,
        "num_signatures": 128,
        "bands": 32,
        "dup_threshold": 0.9,
    },
    "graph": {"quarantine_cap": None},
    "label": {
        "pair_sim_threshold": 0.5,
        "distance_threshold_miles": 300.0,
        "phone_count_threshold": 3,
        "rule_combination": "or",
        "split_ratio": 0.8,
        "pairs_per_class": 1000,
        "include_giant_component": True,
        "feature_scope": "component",
    },
    "analysis": {
        "strata": "location",
        "variant": {
            "pair_sim_threshold": None,
            "distance_threshold_miles": 150.0,
            "phone_count_threshold": None,
            "rule_combination": None,
        },
    },
    "synth": {
        "n_ads": 1000,
        "dup_rate": 0.9,
        "n_components": 80,
        "component_size_distribution": "heavy_tailed",
        "obfuscation_rate": 0.5,
    },
    "export": {"format": "both", "component": None},
    "stages": {"compare": True, "export": True},
}

# locations and execution details; artifact bytes do not depend on
# these, so they must not invalidate content-addressed manifests
_HASH_EXCLUDE = {"workdir", "corpus.path", "corpus.annotations", "gazetteer", "threads"}


def _merge(base: dict, incoming: dict, path: str = "") -> None:
    for key, value in incoming.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {here}")
        current = base[key]
        if isinstance(current, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{here}: expected an object")
            _merge(current, value, here)
            continue
        if value is not None and current is not None:
            want = type(current)
            if want is float and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            elif want is bool and not isinstance(value, bool):
                raise ConfigError(f"{here}: expected a boolean")
            elif not isinstance(value, want) or (want is int and isinstance(value, bool)):
                raise ConfigError(f"{here}: expected {want.__name__}")
        base[key] = value


def _apply_override(cfg: dict, expr: str) -> None:
    if "=" not in expr:
        raise ConfigError(f"override must look like key=value, got {expr!r}")
    dotted, raw = expr.split("=", 1)
    keys = dotted.strip().split(".")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node: dict = {}
    leaf = node
    for key in keys[:-1]:
        leaf[key] = {}
        leaf = leaf[key]
    leaf[keys[-1]] = value
    _merge(cfg, node)


def _strip_excluded(cfg: dict) -> dict:
    out = copy.deepcopy(cfg)
    for dotted in _HASH_EXCLUDE:
        node = out
        *parents, last = dotted.split(".")
        for key in parents:
            node = node[key]
        node[last] = None
    return out


def config_hash(cfg_dict: dict) -> str:
    """Content hash over everything except file locations."""
    canon = json.dumps(_strip_excluded(cfg_dict), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass
class PipelineConfig:
    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    @property
    def workdir(self) -> Path:
        return Path(self.raw["workdir"])

    @property
    def threads(self) -> int:
        return self.raw["threads"]

    @property
    def corpus_path(self) -> Path | None:
        p = self.raw["corpus"]["path"]
        return Path(p) if p else None

    @property
    def corpus_format(self) -> str:
        return self.raw["corpus"]["format"]

    @property
    def annotations_path(self) -> Path | None:
        p = self.raw["corpus"]["annotations"]
        return Path(p) if p else None

    @property
    def quarantine_cap(self) -> int | None:
        return self.raw["graph"]["quarantine_cap"]

    @property
    def strata_key(self) -> str:
        return self.raw["analysis"]["strata"]

    @property
    def export_format(self) -> str:
        return self.raw["export"]["format"]

    @property
    def export_component(self) -> int | None:
        return self.raw["export"]["component"]

    def stage_enabled(self, name: str) -> bool:
        return bool(self.raw["stages"].get(name, True))

    def similarity(self) -> SimilarityConfig:
        d = self.raw["dedup"]
        try:
            return SimilarityConfig(seed=self.seed, **d)
        except ConfigError as e:
            raise ConfigError(f"dedup: {e}") from None

    def labeling(self, variant: bool = False) -> LabelingConfig:
        d = dict(self.raw["label"])
        try:
            cfg = LabelingConfig(seed=self.seed, **d)
            if variant:
                changes = {
                    k: v for k, v in self.raw["analysis"]["variant"].items() if v is not None
                }
                cfg = replace(cfg, **changes)
            return cfg
        except ConfigError as e:
            raise ConfigError(f"label: {e}") from None

    def synth_spec(self) -> SynthSpec:
        d = self.raw["synth"]
        try:
            return SynthSpec(seed=self.seed, **d)
        except ConfigError as e:
            raise ConfigError(f"synth: {e}") from None

    def gazetteer(self) -> Gazetteer:
        p = self.raw["gazetteer"]
        return Gazetteer.load(p) if p else Gazetteer.bundled()

    def hash(self) -> str:
        return config_hash(self.raw)

    def validate(self) -> None:
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("seed: expected int")
        if self.threads < 1:
            raise ConfigError("threads: must be >= 1")
        if self.corpus_format not in ("jsonl", "csv"):
            raise ConfigError("corpus.format: must be jsonl or csv")
        cap = self.quarantine_cap
        if cap is not None and cap < 2:
            raise ConfigError("graph.quarantine_cap: must be >= 2 or null")
        if self.strata_key not in ("location", "source"):
            raise ConfigError("analysis.strata: must be location or source")
        if self.export_format not in ("graphml", "dot", "both"):
            raise ConfigError("export.format: must be graphml, dot, or both")
        self.similarity()
        self.labeling()
        self.labeling(variant=True)
        self.synth_spec()


def load_config(
    path: str | Path | None = None,
    overrides: Sequence[str] = (),
    cli_values: dict[str, Any] | None = None,
) -> PipelineConfig:
    """Defaults, then config file, then --set overrides, then CLI flags."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid json ({e})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a json object")
        _merge(cfg, data)
    for expr in overrides:
        _apply_override(cfg, expr)
    for dotted, value in (cli_values or {}).items():
        if value is not None:
            node: dict = {}
            leaf = node
            keys = dotted.split(".")
            for key in keys[:-1]:
                leaf[key] = {}
                leaf = leaf[key]
            leaf[keys[-1]] = value
            _merge(cfg, node)
    out = PipelineConfig(cfg)
    out.validate()
    return out
