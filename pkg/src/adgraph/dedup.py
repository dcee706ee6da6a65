"""Near-duplicate detection: minhash candidates, edit-distance verification.

Texts are first collapsed by exact normalized equality, then candidate
pairs among the distinct texts come from minhash signatures bucketed in
LSH bands, and only candidates are verified with true edit distance.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import NormalizedAd
from .errors import ConfigError
from .unionfind import UnionFind

_U64 = np.uint64
_HASH_BASE = _U64(1099511628211)
_MIX1 = _U64(0xFF51AFD7ED558CCD)
_MIX2 = _U64(0xC4CEB9FE1A85EC53)
_SHIFT33 = _U64(33)


@dataclass(frozen=True)
class SimilarityConfig:
    """Knobs for shingling, minhash, banding, and duplicate verification."""

    shingle_k: int = 5
    num_signatures: int = 128
    bands: int = 32
    dup_threshold: float = 0.9
    seed: int = 0

    def __post_init__(self) -> None:
        if self.shingle_k < 1:
            raise ConfigError("shingle_k must be >= 1")
        if self.num_signatures < 1:
            raise ConfigError("num_signatures must be >= 1")
        if self.bands < 1 or self.num_signatures % self.bands != 0:
            raise ConfigError("bands must be >= 1 and divide num_signatures")
        if not 0.0 < self.dup_threshold <= 1.0:
            raise ConfigError("dup_threshold must be in (0, 1]")

    @property
    def rows_per_band(self) -> int:
        return self.num_signatures // self.bands


def levenshtein(a: str, b: str) -> int:
    """Exact edit distance (insert, delete, substitute all cost 1).

    Myers' bit-parallel formulation; Python integers serve as unbounded
    bit vectors so long strings need no blocking.
    """
    if a == b:
        return 0
    m = len(a)
    if m == 0:
        return len(b)
    if not b:
        return m
    peq: dict[str, int] = {}
    for i, ch in enumerate(a):
        peq[ch] = peq.get(ch, 0) | (1 << i)
    mask = (1 << m) - 1
    high = 1 << (m - 1)
    vp, vn, score = mask, 0, m
    get = peq.get
    for ch in b:
        eq = get(ch, 0)
        d0 = (((eq & vp) + vp) ^ vp) | eq | vn
        hp = vn | (~(d0 | vp) & mask)
        hn = vp & d0
        if hp & high:
            score += 1
        elif hn & high:
            score -= 1
        hp = ((hp << 1) | 1) & mask
        hn = (hn << 1) & mask
        vp = hn | (~(d0 | hp) & mask)
        vn = hp & d0
    return score


def similarity(a: str, b: str) -> float:
    """1 - levenshtein/max(len); two empty strings count as identical."""
    if not a and not b:
        return 1.0
    return 1.0 - levenshtein(a, b) / max(len(a), len(b))


def _shingle_hashes(text: str, k: int) -> np.ndarray:
    """Distinct 64-bit hashes of the k-char shingles of text."""
    if len(text) < k:
        return np.empty(0, dtype=_U64)
    cps = np.frombuffer(text.encode("utf-32-le"), dtype=np.uint32).astype(_U64)
    n = len(cps) - k + 1
    acc = np.zeros(n, dtype=_U64)
    for j in range(k):
        acc = acc * _HASH_BASE + cps[j : j + n]
    # bijective avalanche so band buckets do not cluster on low bits
    acc ^= acc >> _SHIFT33
    acc *= _MIX1
    acc ^= acc >> _SHIFT33
    acc *= _MIX2
    acc ^= acc >> _SHIFT33
    return np.unique(acc)


def _hash_params(cfg: SimilarityConfig) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(cfg.seed)
    mult = rng.integers(0, 2**63, size=cfg.num_signatures, dtype=np.uint64)
    mult = mult * _U64(2) + _U64(1)  # odd multiplier keeps the map bijective mod 2^64
    add = rng.integers(0, 2**63, size=cfg.num_signatures, dtype=np.uint64)
    return mult, add


def minhash_signature(text: str, cfg: SimilarityConfig, params=None) -> np.ndarray:
    """Minhash signature of one text; all-max sentinel if text is too short."""
    mult, add = params if params is not None else _hash_params(cfg)
    shingles = _shingle_hashes(text, cfg.shingle_k)
    if shingles.size == 0:
        return np.full(cfg.num_signatures, np.iinfo(np.uint64).max, dtype=_U64)
    return (shingles[:, None] * mult[None, :] + add[None, :]).min(axis=0)


def candidate_pairs(ads: Sequence[NormalizedAd], cfg: SimilarityConfig) -> set[tuple[str, str]]:
    """Unordered candidate pairs (id_a < id_b) worth verifying.

    Texts of at least shingle_k chars go through minhash + banding; any
    band collision makes a pair a candidate. Shorter texts are compared
    by exact text equality only.
    """
    params = _hash_params(cfg)
    rows = cfg.rows_per_band
    buckets: dict[tuple[int, bytes], list[str]] = {}
    short_groups: dict[str, list[str]] = {}
    for ad in ads:
        if len(ad.norm_text) < cfg.shingle_k:
            short_groups.setdefault(ad.norm_text, []).append(ad.ad_id)
            continue
        sig = minhash_signature(ad.norm_text, cfg, params)
        for band in range(cfg.bands):
            key = (band, sig[band * rows : (band + 1) * rows].tobytes())
            buckets.setdefault(key, []).append(ad.ad_id)

    pairs: set[tuple[str, str]] = set()
    for members in buckets.values():
        if len(members) < 2:
            continue
        members = sorted(set(members))
        for i, a in enumerate(members):
            for b in members[i + 1 :]:
                pairs.add((a, b))
    for members in short_groups.values():
        if len(members) < 2:
            continue
        members = sorted(members)
        for i, a in enumerate(members):
            for b in members[i + 1 :]:
                pairs.add((a, b))
    return pairs


@dataclass
class DuplicateCluster:
    """A set of mutually duplicate ads and its chosen representative."""

    canonical_id: str
    member_ids: list[str]
    method: str  # "exact" when all members share one normalized text, else "near"


def deduplicate(
    ads: Sequence[NormalizedAd],
    cfg: SimilarityConfig | None = None,
    posted_at: Mapping[str, datetime] | None = None,
) -> list[DuplicateCluster]:
    """Cluster ads whose normalized texts are exact or near duplicates.

    Near-duplicate merges require verified similarity >= dup_threshold
    and chain transitively. The canonical member is the earliest
    posted_at when given (ties, or no timestamps: lowest ad_id).
    """
    cfg = cfg or SimilarityConfig()
    seen: set[str] = set()
    for ad in ads:
        if ad.ad_id in seen:
            raise ValueError(f"duplicate ad_id {ad.ad_id!r} in dedup input")
        seen.add(ad.ad_id)

    groups: dict[str, list[str]] = {}
    by_id: dict[str, NormalizedAd] = {}
    for ad in ads:
        groups.setdefault(ad.norm_text, []).append(ad.ad_id)
        by_id[ad.ad_id] = ad

    def sort_key(ad_id: str):
        if posted_at is not None and ad_id in posted_at:
            return (0, posted_at[ad_id], ad_id)
        return (1, None, ad_id) if posted_at else (0, 0, ad_id)

    reps: list[NormalizedAd] = []
    for text in groups:
        groups[text].sort()
        rep_id = min(groups[text], key=sort_key)
        reps.append(by_id[rep_id])
    reps.sort(key=lambda ad: ad.ad_id)

    threshold = cfg.dup_threshold
    uf = UnionFind(ad.ad_id for ad in reps)
    shingle_cache: dict[str, np.ndarray] = {}

    def shingle_arr(ad_id: str) -> np.ndarray:
        arr = shingle_cache.get(ad_id)
        if arr is None:
            arr = _shingle_hashes(by_id[ad_id].norm_text, cfg.shingle_k)
            shingle_cache[ad_id] = arr
        return arr

    for id_a, id_b in sorted(candidate_pairs(reps, cfg)):
        if uf.connected(id_a, id_b):
            continue
        ta, tb = by_id[id_a].norm_text, by_id[id_b].norm_text
        longest = max(len(ta), len(tb))
        if longest == 0:
            uf.union(id_a, id_b)
            continue
        if 1.0 - abs(len(ta) - len(tb)) / longest < threshold:
            continue
        # One edit changes at most shingle_k members of a text's shingle
        # set, so similarity >= threshold (edit distance <= d_allow)
        # forces exact shingle-set Jaccard >= j_min. Measuring a Jaccard
        # below that floor proves the pair fails verification, skipping
        # the far costlier edit-distance computation; the bound is
        # vacuous (lo <= 0) for loose thresholds and then never skips.
        sa, sb = shingle_arr(id_a), shingle_arr(id_b)
        if sa.size and sb.size:
            d_allow = (1.0 - threshold) * longest
            m = float(max(sa.size, sb.size))
            lo = m - cfg.shingle_k * d_allow
            if lo > 0.0:
                inter = np.intersect1d(sa, sb, assume_unique=True).size
                union = sa.size + sb.size - inter
                j_min = lo / (m + cfg.shingle_k * d_allow)
                if inter / union < j_min - 1e-9:
                    continue
        if 1.0 - levenshtein(ta, tb) / longest >= threshold:
            uf.union(id_a, id_b)

    clusters: list[DuplicateCluster] = []
    for members in uf.groups().values():
        all_ids: list[str] = []
        for rep_id in members:
            all_ids.extend(groups[by_id[rep_id].norm_text])
        all_ids.sort()
        canonical = min(all_ids, key=sort_key)
        method = "near" if len(members) > 1 else "exact"
        clusters.append(DuplicateCluster(canonical_id=canonical, member_ids=all_ids, method=method))
    clusters.sort(key=lambda c: c.canonical_id)
    return clusters


def cluster_to_dict(cluster: DuplicateCluster) -> dict:
    return {
        "canonical_id": cluster.canonical_id,
        "member_ids": list(cluster.member_ids),
        "method": cluster.method,
    }


def cluster_from_dict(obj: dict) -> DuplicateCluster:
    return DuplicateCluster(
        canonical_id=obj["canonical_id"],
        member_ids=list(obj["member_ids"]),
        method=obj["method"],
    )


def clusters_by_member(clusters: Iterable[DuplicateCluster]) -> dict[str, str]:
    """Map every member ad_id to its cluster's canonical_id."""
    out: dict[str, str] = {}
    for cluster in clusters:
        for member in cluster.member_ids:
            out[member] = cluster.canonical_id
    return out
