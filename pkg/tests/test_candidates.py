import pytest

from lemtag.candidates import (
    build_inventory,
    coverage_stats,
    generate_candidates,
)
from lemtag.edit_tree import apply_tree, extract_tree, identity_tree


TRAIN = [("worked", "work"), ("touched", "touch"), ("was", "be")]


class TestBuildInventory:
    def test_tree_counting_and_pruning(self):
        inv, seen = build_inventory(TRAIN, min_pair_count=2)
        ed_strip = extract_tree("worked", "work")
        was_be = extract_tree("was", "be")
        assert inv.count(ed_strip) == 2
        assert ed_strip in inv
        assert was_be not in inv

    def test_threshold_one_keeps_everything(self):
        inv, _ = build_inventory(TRAIN, min_pair_count=1)
        distinct = {extract_tree(f, l) for f, l in TRAIN} | {identity_tree()}
        assert len(inv) == len(distinct)

    def test_duplicate_tokens_count_once(self):
        inv, _ = build_inventory(TRAIN + [("worked", "work")] * 5, min_pair_count=2)
        assert inv.count(extract_tree("worked", "work")) == 2

    def test_identity_always_included(self):
        inv, _ = build_inventory([("was", "be")], min_pair_count=2)
        assert identity_tree() in inv

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            build_inventory([], min_pair_count=2)

    def test_extraction_is_lowercased(self):
        inv, _ = build_inventory([("Worked", "Work"), ("Touched", "Touch")], 2)
        assert inv.count(extract_tree("worked", "work")) == 2

    def test_tree_ids_are_stable(self):
        inv, _ = build_inventory(TRAIN, min_pair_count=1)
        inv2, _ = build_inventory(TRAIN, min_pair_count=1)
        assert [inv.tree_id(t) for t in inv.trees] == [
            inv2.tree_id(t) for t in inv2.trees
        ]


class TestGenerateCandidates:
    def test_applies_all_trees(self):
        inv, seen = build_inventory(
            [("worked", "work"), ("touched", "touch")], min_pair_count=2
        )
        cand = generate_candidates("touched", inv, seen)
        assert set(cand.lemmata()) == {"touch", "touched"}

    def test_seen_lemma_always_included(self):
        inv, seen = build_inventory(TRAIN, min_pair_count=2)
        cand = generate_candidates("was", inv, seen)
        assert "be" in cand.lemmata()
        entry = next(e for e in cand.entries if e.lemma == "be")
        assert entry.provenance == "seen"

    def test_figure_tree_output_present(self):
        inv, seen = build_inventory(
            [("umgeschaut", "umschauen"), ("angebaut", "anbauen")], min_pair_count=2
        )
        cand = generate_candidates("umgeschaut", inv, seen)
        assert "umschauen" in cand.lemmata()

    def test_capitalized_form_gets_capitalized_variant(self):
        inv, seen = build_inventory(
            [("tagen", "tag"), ("wegen", "weg")], min_pair_count=2
        )
        cand = generate_candidates("Bergen", inv, seen)
        lemmata = set(cand.lemmata())
        assert "berg" in lemmata and "Berg" in lemmata

    def test_lowercase_form_gets_no_extra_variants(self):
        inv, seen = build_inventory(
            [("worked", "work"), ("touched", "touch")], min_pair_count=2
        )
        assert set(generate_candidates("touched", inv, seen).lemmata()) == {
            "touch",
            "touched",
        }

    def test_tree_provenance_is_sound(self):
        inv, seen = build_inventory(TRAIN, min_pair_count=1)
        for form in ["worked", "touched", "poked", "was"]:
            cand = generate_candidates(form, inv, seen)
            for entry in cand.entries:
                for tree_id in entry.trees:
                    out = apply_tree(inv.trees[tree_id], form.lower())
                    assert out is not None
                    assert out.lower() == entry.lemma.lower()

    def test_monotone_in_threshold(self):
        pairs = TRAIN + [("played", "play"), ("walks", "walk"), ("runs", "run")]
        inv_strict, seen = build_inventory(pairs, min_pair_count=3)
        inv_loose, _ = build_inventory(pairs, min_pair_count=1)
        for form in ["worked", "flies", "was", "jogs"]:
            strict = set(generate_candidates(form, inv_strict, seen).lemmata())
            loose = set(generate_candidates(form, inv_loose, seen).lemmata())
            assert strict <= loose

    def test_entries_sorted_by_lemma(self):
        inv, seen = build_inventory(TRAIN, min_pair_count=1)
        cand = generate_candidates("worked", inv, seen)
        assert list(cand.lemmata()) == sorted(cand.lemmata())


class TestCoverageStats:
    def test_training_data_fully_covered(self):
        inv, seen = build_inventory(TRAIN, min_pair_count=2)
        mean, coverage = coverage_stats(TRAIN, inv, seen)
        assert coverage == 1.0
        assert mean > 0

    def test_empty_model_gives_zero(self):
        inv, seen = build_inventory([("a", "b")], min_pair_count=5)
        # Identity still applies, so drop it by faking an unapplicable set:
        # instead, check an inventory whose only tree is identity against
        # unseen forms: coverage is driven by identity matches only.
        mean, coverage = coverage_stats([("zzz", "qqq")], inv, seen)
        assert coverage == 0.0

    def test_capitalization_insensitive(self):
        inv, seen = build_inventory([("worked", "work"), ("poked", "poke")], 1)
        _, coverage = coverage_stats([("Talked", "TALK")], inv, seen)
        assert coverage == 1.0

    def test_rejects_empty_held_out(self):
        inv, seen = build_inventory(TRAIN, 2)
        with pytest.raises(ValueError):
            coverage_stats([], inv, seen)
