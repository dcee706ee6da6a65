"""Pseudo-labeling: balanced pair datasets, component splits, risk labels.

Pair labels come from graph components (1 = same component). Components
never straddle the train/test boundary, and neither does any emitted
pair. Risk labels fire on geographic span and phone counts computed per
component (or per ad, by config) and are inherited by member ads.
"""

from __future__ import annotations

import bisect
import hashlib
import itertools
import logging
import random
from dataclasses import dataclass
from typing import Mapping

from .dedup import similarity
from .errors import ConfigError, LabelingError
from .geo import Gazetteer, haversine_miles
from .graph import RelatednessGraph

log = logging.getLogger(__name__)

# below this many same-class candidate pairs the sampler enumerates and
# shuffles instead of rejection-sampling
_ENUMERATE_LIMIT = 200_000

RULE_DISTANCE = "distance"
RULE_PHONES = "phones"


@dataclass(frozen=True)
class LabelingConfig:
    pair_sim_threshold: float = 0.5
    distance_threshold_miles: float = 300.0
    phone_count_threshold: int = 3
    rule_combination: str = "or"
    split_ratio: float = 0.8
    seed: int = 0
    pairs_per_class: int = 1000
    include_giant_component: bool = True
    feature_scope: str = "component"

    def __post_init__(self) -> None:
        if self.pair_sim_threshold <= 0:
            raise ConfigError("pair_sim_threshold must be positive")
        if self.distance_threshold_miles <= 0:
            raise ConfigError("distance_threshold_miles must be positive")
        if self.phone_count_threshold <= 0:
            raise ConfigError("phone_count_threshold must be positive")
        if self.rule_combination not in ("or", "and"):
            raise ConfigError("rule_combination must be 'or' or 'and'")
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigError("split_ratio must be in (0, 1)")
        if self.pairs_per_class < 1:
            raise ConfigError("pairs_per_class must be >= 1")
        if self.feature_scope not in ("component", "ad"):
            raise ConfigError("feature_scope must be 'component' or 'ad'")


@dataclass
class LabeledPair:
    ad_id_a: str
    ad_id_b: str
    label: int
    similarity: float
    split: str


@dataclass
class HtrpFeatures:
    max_span_miles: float
    unique_phone_count: int
    unique_identifier_count: int
    unresolved_locations: int


@dataclass
class LabeledAd:
    ad_id: str
    label: int
    features: HtrpFeatures
    rule_trace: list[str]


def split_components(graph: RelatednessGraph, cfg: LabelingConfig) -> dict[int, str]:
    """Assign every component to train or test, keeping components whole.

    Components are taken largest first (ties ordered by a seeded hash)
    and each goes to the split with the larger remaining ad-count
    deficit against its target share; exact ties go to train.
    """
    total = sum(len(m) for m in graph.components.values())
    if total == 0:
        return {}

    def tiebreak(cid: int) -> str:
        return hashlib.sha256(f"{cfg.seed}:{cid}".encode()).hexdigest()

    order = sorted(
        graph.components,
        key=lambda cid: (-len(graph.components[cid]), tiebreak(cid), cid),
    )
    train_target = cfg.split_ratio * total
    test_target = (1.0 - cfg.split_ratio) * total
    train_count = test_count = 0
    assignment: dict[int, str] = {}
    for cid in order:
        size = len(graph.components[cid])
        if train_target - train_count >= test_target - test_count:
            assignment[cid] = "train"
            train_count += size
        else:
            assignment[cid] = "test"
            test_count += size
    return assignment


def split_report(graph: RelatednessGraph, assignment: Mapping[int, str], cfg: LabelingConfig) -> dict:
    """Counts, achieved-vs-target deviation, and giant-component share."""
    train_ads = sum(len(graph.components[c]) for c, s in assignment.items() if s == "train")
    test_ads = sum(len(graph.components[c]) for c, s in assignment.items() if s == "test")
    total = train_ads + test_ads
    largest = max((len(m) for m in graph.components.values()), default=0)
    achieved = train_ads / total if total else 0.0
    return {
        "train_ads": train_ads,
        "test_ads": test_ads,
        "deviation": abs(achieved - cfg.split_ratio),
        "giant_component_share": largest / total if total else 0.0,
    }


def _giant_component(graph: RelatednessGraph) -> int | None:
    best = None
    for cid, members in graph.components.items():
        if best is None or (len(members), -cid) > (len(graph.components[best]), -best):
            best = cid
    return best


def _sample_positives(
    graph: RelatednessGraph,
    texts: Mapping[str, str],
    cfg: LabelingConfig,
    rng: random.Random,
) -> list[tuple[str, str, float]]:
    excluded = None if cfg.include_giant_component else _giant_component(graph)
    comps = [
        members
        for cid, members in sorted(graph.components.items())
        if len(members) >= 2 and cid != excluded
    ]
    total_pairs = sum(len(m) * (len(m) - 1) // 2 for m in comps)
    if total_pairs == 0:
        return []

    threshold = cfg.pair_sim_threshold
    want = cfg.pairs_per_class
    out: list[tuple[str, str, float]] = []

    if total_pairs <= _ENUMERATE_LIMIT:
        candidates = [pair for members in comps for pair in itertools.combinations(members, 2)]
        rng.shuffle(candidates)
        for a, b in candidates:
            sim = similarity(texts[a], texts[b])
            if sim < threshold:
                out.append((a, b, sim))
                if len(out) == want:
                    break
        return out

    weights = list(itertools.accumulate(len(m) * (len(m) - 1) // 2 for m in comps))
    seen: set[tuple[str, str]] = set()
    attempts = 0
    budget = max(60 * want, 10_000)
    while len(out) < want and attempts < budget:
        attempts += 1
        r = rng.randrange(weights[-1])
        members = comps[bisect.bisect_right(weights, r)]
        i, j = rng.sample(range(len(members)), 2)
        a, b = members[i], members[j]
        if a > b:
            a, b = b, a
        if (a, b) in seen:
            continue
        seen.add((a, b))
        sim = similarity(texts[a], texts[b])
        if sim < threshold:
            out.append((a, b, sim))
    return out


def _sample_negatives(
    graph: RelatednessGraph,
    texts: Mapping[str, str],
    cfg: LabelingConfig,
    split_of: Mapping[int, str],
    rng: random.Random,
) -> list[tuple[str, str, float]]:
    by_split: dict[str, list[str]] = {"train": [], "test": []}
    for cid, members in sorted(graph.components.items()):
        by_split[split_of[cid]].extend(members)
    comp_of = graph.component_of

    def cross_pairs(nodes: list[str]) -> int:
        n = len(nodes)
        within = {}
        for node in nodes:
            within[comp_of[node]] = within.get(comp_of[node], 0) + 1
        return n * (n - 1) // 2 - sum(k * (k - 1) // 2 for k in within.values())

    sides = [(name, sorted(nodes)) for name, nodes in by_split.items() if len(nodes) >= 2]
    totals = {name: cross_pairs(nodes) for name, nodes in sides}
    available = sum(totals.values())
    if available == 0:
        return []

    threshold = cfg.pair_sim_threshold
    want = cfg.pairs_per_class
    out: list[tuple[str, str, float]] = []

    if available <= _ENUMERATE_LIMIT:
        candidates = [
            (a, b)
            for _, nodes in sides
            for a, b in itertools.combinations(nodes, 2)
            if comp_of[a] != comp_of[b]
        ]
        rng.shuffle(candidates)
        for a, b in candidates:
            sim = similarity(texts[a], texts[b])
            if sim < threshold:
                out.append((a, b, sim))
                if len(out) == want:
                    break
        return out

    names = [name for name, _ in sides]
    cum = list(itertools.accumulate(totals[name] for name in names))
    nodes_of = dict(sides)
    seen: set[tuple[str, str]] = set()
    attempts = 0
    budget = max(60 * want, 10_000)
    while len(out) < want and attempts < budget:
        attempts += 1
        r = rng.randrange(cum[-1])
        name = names[bisect.bisect_right(cum, r)]
        nodes = nodes_of[name]
        i, j = rng.sample(range(len(nodes)), 2)
        a, b = nodes[i], nodes[j]
        if comp_of[a] == comp_of[b]:
            continue
        if a > b:
            a, b = b, a
        if (a, b) in seen:
            continue
        seen.add((a, b))
        sim = similarity(texts[a], texts[b])
        if sim < threshold:
            out.append((a, b, sim))
    return out


def generate_oad_pairs(
    graph: RelatednessGraph,
    texts: Mapping[str, str],
    cfg: LabelingConfig,
    split_of: Mapping[int, str] | None = None,
) -> list[LabeledPair]:
    """Balanced same-component / cross-component pair dataset.

    Both classes are sampled seeded-uniformly from their candidate
    pools, drop any pair at or above pair_sim_threshold similarity, and
    are truncated to the smaller class. Negative pairs are drawn within
    one split side so no pair crosses the boundary.
    """
    if len(graph.components) < 2:
        raise LabelingError("need at least 2 components to form negative pairs")
    missing = [n for n in graph.nodes if n not in texts]
    if missing:
        raise LabelingError(f"missing normalized text for {len(missing)} nodes, e.g. {missing[0]!r}")
    if split_of is None:
        split_of = split_components(graph, cfg)

    positives = _sample_positives(graph, texts, cfg, random.Random(f"{cfg.seed}:oad:pos"))
    negatives = _sample_negatives(graph, texts, cfg, split_of, random.Random(f"{cfg.seed}:oad:neg"))
    keep = min(len(positives), len(negatives))
    if keep < cfg.pairs_per_class:
        log.info("pair candidates exhausted at %d per class (wanted %d)", keep, cfg.pairs_per_class)

    pairs = [
        LabeledPair(a, b, 1, sim, split_of[graph.component_of[a]])
        for a, b, sim in positives[:keep]
    ]
    pairs.extend(
        LabeledPair(a, b, 0, sim, split_of[graph.component_of[a]])
        for a, b, sim in negatives[:keep]
    )
    return pairs


def _component_features(
    nodes: list[str],
    graph: RelatednessGraph,
    gazetteer: Gazetteer,
) -> HtrpFeatures:
    identifiers: set[str] = set()
    raw_locations: set[str] = set()
    for node in nodes:
        identifiers.update(graph.node_identifiers.get(node, ()))
        raw_locations.update(loc.strip().casefold() for loc in graph.node_locations.get(node, ()))

    coords: set[tuple[float, float]] = set()
    unresolved = 0
    for loc in sorted(raw_locations):
        point = gazetteer.resolve(loc)
        if point is None:
            unresolved += 1
        else:
            coords.add(point)

    span = 0.0
    points = sorted(coords)
    for i, p in enumerate(points):
        for q in points[i + 1 :]:
            span = max(span, haversine_miles(p[0], p[1], q[0], q[1]))

    phones = {key for key in identifiers if key.startswith("phone:")}
    return HtrpFeatures(
        max_span_miles=span,
        unique_phone_count=len(phones),
        unique_identifier_count=len(identifiers),
        unresolved_locations=unresolved,
    )


def _apply_rules(features: HtrpFeatures, cfg: LabelingConfig) -> tuple[int, list[str]]:
    fired = []
    if features.max_span_miles > cfg.distance_threshold_miles:
        fired.append(RULE_DISTANCE)
    if features.unique_phone_count >= cfg.phone_count_threshold:
        fired.append(RULE_PHONES)
    if cfg.rule_combination == "or":
        label = 1 if fired else 0
    else:
        label = 1 if len(fired) == 2 else 0
    return label, fired


def label_htrp(
    graph: RelatednessGraph,
    gazetteer: Gazetteer,
    cfg: LabelingConfig,
) -> list[LabeledAd]:
    """Binary risk label per canonical ad, from span and phone-count rules.

    With feature_scope "component" (default) features pool over the
    whole component and members inherit them; "ad" scores each node on
    its own cluster's identifiers and locations.
    """
    if len(gazetteer) == 0:
        raise ConfigError("gazetteer is empty")
    out: list[LabeledAd] = []
    if cfg.feature_scope == "component":
        for _, members in sorted(graph.components.items()):
            features = _component_features(members, graph, gazetteer)
            label, fired = _apply_rules(features, cfg)
            out.extend(LabeledAd(node, label, features, list(fired)) for node in members)
    else:
        for node in graph.nodes:
            features = _component_features([node], graph, gazetteer)
            label, fired = _apply_rules(features, cfg)
            out.append(LabeledAd(node, label, features, list(fired)))
    out.sort(key=lambda ad: ad.ad_id)
    return out


def pair_to_dict(pair: LabeledPair) -> dict:
    return {
        "a": pair.ad_id_a,
        "b": pair.ad_id_b,
        "label": pair.label,
        "similarity": pair.similarity,
        "split": pair.split,
    }


def pair_from_dict(obj: dict) -> LabeledPair:
    return LabeledPair(obj["a"], obj["b"], obj["label"], obj["similarity"], obj["split"])


def labeled_ad_to_dict(ad: LabeledAd) -> dict:
    return {
        "ad_id": ad.ad_id,
        "label": ad.label,
        "features": {
            "max_span_miles": ad.features.max_span_miles,
            "unique_phone_count": ad.features.unique_phone_count,
            "unique_identifier_count": ad.features.unique_identifier_count,
            "unresolved_locations": ad.features.unresolved_locations,
        },
        "rule_trace": list(ad.rule_trace),
    }


def labeled_ad_from_dict(obj: dict) -> LabeledAd:
    f = obj["features"]
    return LabeledAd(
        ad_id=obj["ad_id"],
        label=obj["label"],
        features=HtrpFeatures(
            max_span_miles=f["max_span_miles"],
            unique_phone_count=f["unique_phone_count"],
            unique_identifier_count=f["unique_identifier_count"],
            unresolved_locations=f["unresolved_locations"],
        ),
        rule_trace=list(obj["rule_trace"]),
    )
