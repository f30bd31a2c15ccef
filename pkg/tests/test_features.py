from collections import Counter

import pytest

from lemtag.edit_tree import extract_tree, identity_tree
from lemtag.features import (
    FeatureConfig,
    FeatureDictionary,
    Lexicon,
    MorphTag,
    build_lexicon_from_text,
    lemma_feature_counts,
)


class TestMorphTag:
    def test_attrs_sorted_and_deduped(self):
        tag = MorphTag("N", ("Plural", "Common", "Plural"))
        assert tag.attrs == ("Common", "Plural")
        assert tag.render() == "N|Common|Plural"

    def test_parse_round_trip(self):
        tag = MorphTag("V", ("Num=Pl", "Per=3"))
        assert MorphTag.parse(tag.render()) == tag
        assert MorphTag.parse("D") == MorphTag("D")

    def test_empty_pos_rejected(self):
        with pytest.raises(ValueError):
            MorphTag("")


class TestFeatureDictionary:
    def test_growing_assigns_dense_indices(self):
        d = FeatureDictionary()
        assert d.intern("treeX") == 0
        assert d.intern("treeX") == 0
        assert d.intern("other") == 1
        assert d.name(0) == "treeX"

    def test_frozen_rejects_unseen(self):
        d = FeatureDictionary()
        d.intern("a")
        d.freeze()
        assert d.intern("a") == 0
        assert d.intern("b") is None
        assert len(d) == 1

    def test_vectorize_drops_unknown_when_frozen(self):
        d = FeatureDictionary()
        d.intern("a")
        d.freeze()
        vec = d.vectorize(Counter({"a": 2, "b": 1}))
        assert list(vec.items()) == [(0, 2.0)]


class TestLexicon:
    def test_load_skips_comments(self, tmp_path):
        p = tmp_path / "words.txt"
        p.write_text("haus\n# comment\nbaum  # trailing\n\n", encoding="utf-8")
        lex = Lexicon.load(p, "test")
        assert "haus" in lex and "baum" in lex
        assert len(lex) == 2

    def test_build_from_text_applies_min_count(self):
        words = build_lexicon_from_text(["a b a", "a c b"], min_count=2)
        assert words == ["a", "b"]


class TestLemmaFeatures:
    def test_pos_and_attribute_conjunctions(self):
        tag = MorphTag("Noun", ("Common", "Feminine", "Plural"))
        counts = lemma_feature_counts(
            "medidas", "medida", identity_tree(), 0, tag
        )
        lemma_key = "l\tmedida"
        for suffix in ["", "\tP\tNoun", "\tM\tCommon", "\tM\tFeminine", "\tM\tPlural"]:
            assert counts[lemma_key + suffix] == 1

    def test_conjunction_count_invariant(self):
        tag = MorphTag("V", ("A", "B"))
        cfg = FeatureConfig()
        counts = lemma_feature_counts(
            "worked", "work", extract_tree("worked", "work"), 3, tag, cfg=cfg
        )
        base = [n for n in counts if "\tP\t" not in n and "\tM\t" not in n]
        # base + pos conjunction + one per attribute
        assert len(counts) == len(base) * (1 + 1 + len(tag.attrs))
        total_base = sum(counts[n] for n in base)
        assert sum(counts.values()) == total_base * (2 + len(tag.attrs))

    def test_identity_features_enumerable(self):
        counts = lemma_feature_counts(
            "work", "work", identity_tree(), 0, MorphTag("V")
        )
        assert counts["t\t0"] == 1
        assert counts["tw\t0\twork"] == 1
        assert counts["tp\t0\tw"] == 1
        assert counts["ts\t0\tk"] == 1
        assert counts["l\twork"] == 1
        assert counts["lp\twork"] == 1

    def test_alignment_context_feature(self):
        tree = extract_tree("umgeschaut", "umschauen")
        counts = lemma_feature_counts(
            "umgeschaut", "umschauen", tree, 1, MorphTag("V")
        )
        # the ge -> empty deletion with its left form context "um"
        assert counts["a\tge\t"] == 1
        assert counts["afl\tge\t\tum"] == 1

    def test_affix_and_context_caps(self):
        tree = extract_tree("internationalization", "internationalize")
        cfg = FeatureConfig(max_affix_len=10, max_context_len=6)
        counts = lemma_feature_counts(
            "internationalization", "internationalize", tree, 0, MorphTag("N"), cfg=cfg
        )
        for name in counts:
            fields = name.split("\t")
            if fields[0] in ("tp", "ts"):
                assert len(fields[2]) <= 10
            if fields[0] in ("lp", "ls"):
                assert len(fields[1]) <= 10
            if fields[0] in ("afl", "afr", "all", "alr"):
                assert len(fields[3]) <= 6

    def test_seen_only_candidates_limited_groups(self):
        counts = lemma_feature_counts(
            "was", "be", None, None, MorphTag("V"), seen=True
        )
        groups = {n.split("\t", 1)[0] for n in counts}
        assert "seen" in groups
        assert groups <= {"seen", "l", "lp", "ls", "dict"}

    def test_dictionary_variant_features(self):
        lex = Lexicon("wiki", frozenset({"haus", "Haus"}))
        counts = lemma_feature_counts(
            "Häuser", "Haus", None, None, MorphTag("N"), lexicons=[lex], seen=True
        )
        assert counts["dict\twiki\tlow"] == 1
        assert counts["dict\twiki\tfirst"] == 1
        assert counts["dict\twiki\tasis"] == 1
        assert "dict\twiki\tup" not in counts

    def test_extraction_deterministic(self):
        tree = extract_tree("umgeschaut", "umschauen")
        tag = MorphTag("V", ("Part",))
        a = lemma_feature_counts("umgeschaut", "umschauen", tree, 1, tag)
        b = lemma_feature_counts("umgeschaut", "umschauen", tree, 1, tag)
        assert a == b

    def test_group_flags_disable_groups(self):
        tree = extract_tree("worked", "work")
        cfg = FeatureConfig(use_align=False, use_lemma=False, use_dict=False)
        counts = lemma_feature_counts("worked", "work", tree, 0, MorphTag("V"), cfg=cfg)
        groups = {n.split("\t", 1)[0] for n in counts}
        assert groups <= {"t", "tw", "tp", "ts"}
