import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adgraph import dedup
from adgraph.errors import ConfigError

from conftest import make_norm, ts
from oracles import cluster_ref, levenshtein_ref, similarity_ref


class TestLevenshtein:
    CASES = [
        ("", "", 0),
        ("", "abc", 3),
        ("abc", "", 3),
        ("abc", "abc", 0),
        ("kitten", "sitting", 3),
        ("flaw", "lawn", 2),
        ("gumbo", "gambol", 2),
        ("a" * 70, "a" * 70 + "b", 1),  # crosses the 64-bit word boundary
    ]

    @pytest.mark.parametrize("a,b,want", CASES)
    def test_known_distances(self, a, b, want):
        assert dedup.levenshtein(a, b) == want

    def test_symmetric(self):
        assert dedup.levenshtein("abcdef", "azced") == dedup.levenshtein("azced", "abcdef")

    @given(st.text(alphabet="ab ", max_size=40), st.text(alphabet="ab ", max_size=40))
    @settings(max_examples=300, deadline=None)
    def test_matches_reference_small_alphabet(self, a, b):
        assert dedup.levenshtein(a, b) == levenshtein_ref(a, b)

    @given(st.text(max_size=30), st.text(max_size=30))
    @settings(max_examples=200, deadline=None)
    def test_matches_reference_any_text(self, a, b):
        assert dedup.levenshtein(a, b) == levenshtein_ref(a, b)

    def test_long_strings_match_reference(self):
        rng = random.Random(7)
        for _ in range(20):
            a = "".join(rng.choice("abcdefg h") for _ in range(rng.randint(80, 220)))
            b = list(a)
            for _ in range(rng.randint(1, 15)):
                i = rng.randrange(len(b))
                b[i] = rng.choice("abcdefg h")
            b = "".join(b)
            assert dedup.levenshtein(a, b) == levenshtein_ref(a, b)


class TestSimilarity:
    def test_both_empty(self):
        assert dedup.similarity("", "") == 1.0

    def test_identical(self):
        assert dedup.similarity("hello world", "hello world") == 1.0

    def test_range(self):
        assert 0.0 <= dedup.similarity("abc", "xyz") <= 1.0

    @given(st.text(max_size=50), st.text(max_size=50))
    @settings(max_examples=100, deadline=None)
    def test_matches_reference(self, a, b):
        assert dedup.similarity(a, b) == pytest.approx(similarity_ref(a, b))


class TestSimilarityConfig:
    def test_defaults_valid(self):
        cfg = dedup.SimilarityConfig()
        assert cfg.rows_per_band == 4

    def test_bands_must_divide(self):
        with pytest.raises(ConfigError):
            dedup.SimilarityConfig(num_signatures=128, bands=33)

    def test_threshold_range(self):
        with pytest.raises(ConfigError):
            dedup.SimilarityConfig(dup_threshold=0.0)


def _random_text(rng, n):
    return "".join(rng.choice("abcdefghijklmnop  ") for _ in range(n))


def _mutate(rng, text, edits):
    chars = list(text)
    for _ in range(edits):
        i = rng.randrange(len(chars))
        chars[i] = rng.choice("abcdefghijklmnop")
    return "".join(chars)


class TestCandidatePairs:
    def test_identical_short_texts_pair_up(self):
        ads = [make_norm("a", "hi"), make_norm("b", "hi"), make_norm("c", "yo")]
        pairs = dedup.candidate_pairs(ads, dedup.SimilarityConfig())
        assert ("a", "b") in pairs

    def test_near_duplicates_found(self):
        rng = random.Random(11)
        base = _random_text(rng, 150)
        ads = [make_norm("a", base), make_norm("b", _mutate(rng, base, 3))]
        pairs = dedup.candidate_pairs(ads, dedup.SimilarityConfig())
        assert ("a", "b") in pairs

    def test_deterministic(self):
        rng = random.Random(12)
        ads = [make_norm(f"x{i}", _random_text(rng, 60)) for i in range(30)]
        cfg = dedup.SimilarityConfig()
        assert dedup.candidate_pairs(ads, cfg) == dedup.candidate_pairs(ads, cfg)


class TestDeduplicate:
    def _corpus(self, seed, n_base=8):
        """Random bases with exact and near copies; returns (ads, texts)."""
        rng = random.Random(seed)
        ads = []
        texts = {}
        counter = 0
        for _ in range(n_base):
            base = _random_text(rng, rng.randint(80, 140))
            for _ in range(rng.randint(1, 4)):
                kind = rng.random()
                if kind < 0.4:
                    text = base
                elif kind < 0.8:
                    text = _mutate(rng, base, rng.randint(1, 3))
                else:
                    text = base
                ad_id = f"a{counter:03d}"
                counter += 1
                ads.append(make_norm(ad_id, text))
                texts[ad_id] = ads[-1].norm_text
        return ads, texts

    @pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
    def test_matches_brute_force_partition(self, seed):
        ads, texts = self._corpus(seed)
        clusters = dedup.deduplicate(ads, dedup.SimilarityConfig())
        got = {frozenset(c.member_ids) for c in clusters}
        assert got == cluster_ref(texts, 0.9)

    def test_every_ad_in_exactly_one_cluster(self):
        ads, _ = self._corpus(6)
        clusters = dedup.deduplicate(ads)
        seen = [m for c in clusters for m in c.member_ids]
        assert sorted(seen) == sorted(a.ad_id for a in ads)

    def test_canonical_is_earliest_posted(self):
        ads = [make_norm("b", "same text here"), make_norm("a", "same text here"),
               make_norm("c", "same text here")]
        posted = {"b": ts(5), "a": ts(9), "c": ts(1)}
        clusters = dedup.deduplicate(ads, posted_at=posted)
        assert clusters[0].canonical_id == "c"

    def test_canonical_tie_breaks_to_lowest_id(self):
        ads = [make_norm("z", "same text here"), make_norm("m", "same text here")]
        posted = {"z": ts(3), "m": ts(3)}
        clusters = dedup.deduplicate(ads, posted_at=posted)
        assert clusters[0].canonical_id == "m"

    def test_canonical_without_timestamps_is_lowest_id(self):
        ads = [make_norm("z", "same text here"), make_norm("m", "same text here")]
        assert dedup.deduplicate(ads)[0].canonical_id == "m"

    def test_method_exact_vs_near(self):
        rng = random.Random(13)
        base = _random_text(rng, 120)
        ads = [
            make_norm("a", base),
            make_norm("b", base),
            make_norm("c", _mutate(rng, base, 2)),
            make_norm("d", "something else entirely unrelated to the rest"),
        ]
        clusters = dedup.deduplicate(ads)
        by_members = {frozenset(c.member_ids): c.method for c in clusters}
        assert by_members[frozenset({"a", "b", "c"})] == "near"
        assert by_members[frozenset({"d"})] == "exact"

    def test_exact_only_cluster_method(self):
        ads = [make_norm("a", "twin text"), make_norm("b", "twin text")]
        assert dedup.deduplicate(ads)[0].method == "exact"

    def test_duplicate_ad_id_rejected(self):
        ads = [make_norm("a", "x y z"), make_norm("a", "x y z")]
        with pytest.raises(ValueError):
            dedup.deduplicate(ads)

    def test_clusters_sorted_and_members_sorted(self):
        ads, _ = self._corpus(14)
        clusters = dedup.deduplicate(ads)
        assert [c.canonical_id for c in clusters] == sorted(c.canonical_id for c in clusters)
        for c in clusters:
            assert c.member_ids == sorted(c.member_ids)
            assert c.canonical_id in c.member_ids

    def test_transitive_chaining(self):
        # a~b and b~c clear the threshold, a~c does not: one cluster anyway
        rng = random.Random(21)
        base = _random_text(rng, 100)
        b = "z" * 5 + base[5:]
        c = "z" * 5 + "y" * 7 + base[12:]
        assert dedup.similarity(base, b) >= 0.9
        assert dedup.similarity(b, c) >= 0.9
        assert dedup.similarity(base, c) < 0.9
        ads = [make_norm("a", base), make_norm("b", b), make_norm("c", c)]
        clusters = dedup.deduplicate(ads)
        assert len(clusters) == 1 and clusters[0].member_ids == ["a", "b", "c"]

    def test_round_trip_dict(self):
        cl = dedup.DuplicateCluster("a", ["a", "b"], "near")
        assert dedup.cluster_from_dict(dedup.cluster_to_dict(cl)) == cl

    def test_clusters_by_member(self):
        cl = [dedup.DuplicateCluster("a", ["a", "b"], "exact")]
        assert dedup.clusters_by_member(cl) == {"a": "a", "b": "a"}
