import random

import pytest

from lemtag.edit_tree import (
    AlignmentError,
    LcsNode,
    SubNode,
    TreeSyntaxError,
    alignment,
    apply_tree,
    extract_tree,
    identity_tree,
    longest_common_substring,
    parse_tree,
    render_tree,
)


class TestLongestCommonSubstring:
    def test_worked_example(self):
        assert longest_common_substring("umgeschaut", "umschauen") == (4, 9, 2, 7)

    def test_identical(self):
        assert longest_common_substring("abc", "abc") == (0, 3, 0, 3)

    def test_no_overlap(self):
        assert longest_common_substring("ge", "") is None
        assert longest_common_substring("", "xyz") is None
        assert longest_common_substring("abc", "xyz") is None

    def test_tie_break_smallest_start(self):
        # "ab" occurs twice in each string; pick earliest in x, then in y.
        assert longest_common_substring("abxab", "abyab") == (0, 2, 0, 2)
        assert longest_common_substring("xab", "abyab") == (1, 3, 0, 2)

    def test_spans_match(self):
        rng = random.Random(7)
        for _ in range(200):
            x = "".join(rng.choice("abcd") for _ in range(rng.randint(0, 8)))
            y = "".join(rng.choice("abcd") for _ in range(rng.randint(0, 8)))
            span = longest_common_substring(x, y)
            if span is None:
                common = {
                    x[i:j]
                    for i in range(len(x))
                    for j in range(i + 1, len(x) + 1)
                    if x[i:j] in y
                }
                assert not common
            else:
                i_s, i_e, j_s, j_e = span
                assert x[i_s:i_e] == y[j_s:j_e]
                assert i_e > i_s


class TestExtractTree:
    def test_figure_tree(self):
        tree = extract_tree("umgeschaut", "umschauen")
        expected = LcsNode(
            left=LcsNode(SubNode("", ""), 0, SubNode("ge", ""), 2),
            prefix_len=4,
            right=SubNode("t", "en"),
            suffix_len=1,
        )
        assert tree == expected

    def test_identity_pair(self):
        assert extract_tree("work", "work") == LcsNode(
            SubNode("", ""), 0, SubNode("", ""), 0
        )

    def test_generalizes_across_stems(self):
        assert extract_tree("worked", "work") == extract_tree("touched", "touch")

    def test_deterministic(self):
        a = extract_tree("umgeschaut", "umschauen")
        b = extract_tree("umgeschaut", "umschauen")
        assert a == b and hash(a) == hash(b)

    def test_empty_sides_degrade_to_substitution(self):
        assert extract_tree("", "en") == SubNode("", "en")
        assert extract_tree("ab", "") == SubNode("ab", "")


class TestApplyTree:
    def test_figure_tree_applies_to_other_form(self):
        tree = extract_tree("umgeschaut", "umschauen")
        assert apply_tree(tree, "angebaut") == "anbauen"

    def test_figure_tree_fails_where_unapplicable(self):
        tree = extract_tree("umgeschaut", "umschauen")
        assert apply_tree(tree, "einbauen") is None

    def test_identity(self):
        assert apply_tree(identity_tree(), "abc") == "abc"
        assert apply_tree(identity_tree(), "") == ""

    def test_round_trip_random_unicode(self):
        rng = random.Random(42)
        alphabet = "abcdefghäöüб中\U0001f600"
        for _ in range(500):
            x = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 12)))
            y = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 12)))
            assert apply_tree(extract_tree(x, y), x) == y

    def test_generalization_example(self):
        assert apply_tree(extract_tree("worked", "work"), "touched") == "touch"

    def test_never_raises_on_mismatched_tree(self):
        rng = random.Random(3)
        alphabet = "abc"
        trees = [
            extract_tree(
                "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 6))),
                "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 6))),
            )
            for _ in range(50)
        ]
        for tree in trees:
            for _ in range(20):
                x = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 6)))
                result = apply_tree(tree, x)
                assert result is None or isinstance(result, str)

    def test_counts_scalar_values_not_bytes(self):
        # Multi-byte characters must count as single units.
        tree = extract_tree("\U0001f600xy", "xy")
        assert apply_tree(tree, "\U0001f600ab") == "ab"


class TestAlignment:
    def test_paper_alignment(self):
        tree = extract_tree("umgeschaut", "umschauen")
        assert alignment(tree, "umgeschaut", "umschauen") == [
            ("u", "u"),
            ("m", "m"),
            ("ge", ""),
            ("s", "s"),
            ("c", "c"),
            ("h", "h"),
            ("a", "a"),
            ("u", "u"),
            ("t", "en"),
        ]

    def test_identity_alignment(self):
        assert alignment(identity_tree(), "ab", "ab") == [("a", "a"), ("b", "b")]

    def test_suffix_strip_alignment(self):
        tree = extract_tree("worked", "work")
        assert alignment(tree, "worked", "work") == [
            ("w", "w"),
            ("o", "o"),
            ("r", "r"),
            ("k", "k"),
            ("ed", ""),
        ]

    def test_rejects_non_matching_pair(self):
        tree = extract_tree("worked", "work")
        with pytest.raises(AlignmentError):
            alignment(tree, "worked", "worked")

    def test_segments_concatenate_to_inputs(self):
        rng = random.Random(11)
        for _ in range(100):
            x = "".join(rng.choice("abcde") for _ in range(rng.randint(1, 8)))
            y = "".join(rng.choice("abcde") for _ in range(rng.randint(1, 8)))
            tree = extract_tree(x, y)
            pairs = alignment(tree, x, y)
            assert "".join(a for a, _ in pairs) == x
            assert "".join(b for _, b in pairs) == y


class TestRendering:
    def test_figure_rendering(self):
        tree = extract_tree("umgeschaut", "umschauen")
        assert render_tree(tree) == (
            '(lcs 4 1 (lcs 0 2 (sub "" "") (sub "ge" "")) (sub "t" "en"))'
        )

    def test_round_trip(self):
        rng = random.Random(5)
        alphabet = 'ab"\\() é'
        for _ in range(200):
            x = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 6)))
            y = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 6)))
            tree = extract_tree(x, y)
            assert parse_tree(render_tree(tree)) == tree

    def test_parse_rejects_garbage(self):
        for bad in ["", "(lcs 1", '(sub "a")', "(foo)", '(sub "a" "b") extra']:
            with pytest.raises(TreeSyntaxError):
                parse_tree(bad)
