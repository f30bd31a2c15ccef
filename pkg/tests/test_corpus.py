import pytest

from lemtag.corpus import (
    ColumnMap,
    CorpusFormatError,
    ParadigmClass,
    ParadigmSlot,
    SyntheticSpec,
    Token,
    corpus_vocabulary,
    default_spec,
    evaluate,
    generate_synthetic_corpus,
    parse_corpus,
    read_corpus,
    render_corpus,
    syncretic_spec,
    truncate_corpus,
    write_corpus,
)
from lemtag.features import MorphTag


CONLL_SNIPPET = """\
1\tHäuser\tHaus\t_\tNN\t_\tNum=Pl|Gen=Neut\t_
2\tstehen\tstehen\t_\tVV\t_\tNum=Pl\t_

1\tja\tja\t_\tADV\t_\t_\t_
"""


class TestReading:
    def test_blank_line_separates_sentences(self):
        sentences = parse_corpus(CONLL_SNIPPET.splitlines(True))
        assert len(sentences) == 2
        assert [len(s) for s in sentences] == [2, 1]

    def test_handcrafted_values(self):
        sentences = parse_corpus(CONLL_SNIPPET.splitlines(True))
        token = sentences[0][0]
        assert token.form == "Häuser"
        assert token.lemma == "Haus"
        assert token.tag == MorphTag("NN", ("Gen=Neut", "Num=Pl"))

    def test_underscore_feats_is_empty(self):
        sentences = parse_corpus(CONLL_SNIPPET.splitlines(True))
        assert sentences[1][0].tag == MorphTag("ADV")

    def test_ragged_row_reports_line_number(self):
        lines = ["1\ta\ta\t_\tN\t_\tX|Y\t_\n", "2\tb\tb\n"]
        with pytest.raises(CorpusFormatError) as err:
            parse_corpus(lines)
        assert err.value.line == 2

    def test_unknown_format_rejected(self):
        with pytest.raises(ValueError):
            parse_corpus([], format="xml")

    def test_tsv_format(self):
        sentences = parse_corpus(["haus\thaus\tN|Num=Sg\n", "\n", "geht\tgehen\tV\n"],
                                 format="tsv")
        assert len(sentences) == 2
        assert sentences[0][0].tag.render() == "N|Num=Sg"
        assert sentences[1][0].lemma == "gehen"

    def test_lemma_rewrite_table(self):
        sentences = parse_corpus(
            ["se\tse2\tPRON\n"], format="tsv", lemma_rewrites={"se": "se"}
        )
        assert sentences[0][0].lemma == "se"

    def test_custom_column_map(self):
        sentences = parse_corpus(
            ["walks\twalk\tV\tNum=Sg\n"],
            columns=ColumnMap(form=1, lemma=2, pos=3, feats=4),
        )
        assert sentences[0][0].form == "walks"
        assert sentences[0][0].tag == MorphTag("V", ("Num=Sg",))


class TestRoundTrip:
    @pytest.mark.parametrize("fmt", ["conll09", "tsv"])
    def test_write_read_round_trip(self, tmp_path, fmt):
        sentences = [
            [
                Token("Häuser", "Haus", MorphTag("NN", ("Num=Pl",))),
                Token("stehen", "stehen", MorphTag("VV")),
            ],
            [Token("ja", "ja", MorphTag("ADV"))],
        ]
        path = tmp_path / f"corpus.{fmt}"
        write_corpus(sentences, path, format=fmt)
        back = read_corpus(path, format=fmt)
        assert back == sentences

    def test_missing_annotations_round_trip(self, tmp_path):
        sentences = [[Token("nur")]]
        path = tmp_path / "c.tsv"
        write_corpus(sentences, path, format="tsv")
        assert read_corpus(path, format="tsv") == sentences

    def test_truncation_keeps_crossing_sentence(self):
        sentences = [[Token("a"), Token("b")], [Token("c"), Token("d")], [Token("e")]]
        cut = truncate_corpus(sentences, 3)
        assert sum(len(s) for s in cut) == 4
        assert truncate_corpus(sentences, None) == sentences
        with pytest.raises(ValueError):
            truncate_corpus(sentences, 0)


def _annotated(forms_lemmas_tags):
    return [
        [Token(f, l, MorphTag.parse(t)) for f, l, t in sentence]
        for sentence in forms_lemmas_tags
    ]


class TestEvaluate:
    def test_identical_gives_ones(self):
        gold = _annotated([[("a", "a", "X"), ("bs", "b", "Y")]])
        report = evaluate(gold, gold, {"a"})
        assert report.tag_all == 1.0
        assert report.lemma_all == 1.0
        assert report.joint_all == 1.0
        assert report.n_unknown == 1
        assert report.tag_unk == 1.0

    def test_lemma_match_ignores_capitalization(self):
        gold = _annotated([[("Haus", "haus", "N")]])
        pred = _annotated([[("Haus", "Haus", "N")]])
        report = evaluate(gold, pred, set())
        assert report.lemma_all == 1.0

    def test_tag_match_is_exact(self):
        gold = _annotated([[("x", "x", "N|A=1")]])
        pred = _annotated([[("x", "x", "N")]])
        report = evaluate(gold, pred, {"x"})
        assert report.tag_all == 0.0
        assert report.joint_all == 0.0

    def test_empty_unknown_set_reports_none(self):
        gold = _annotated([[("a", "a", "X")]])
        report = evaluate(gold, gold, {"a"})
        assert report.n_unknown == 0
        assert report.tag_unk is None and report.lemma_unk is None

    def test_unknown_partition_counts(self):
        gold = _annotated([[("a", "a", "X"), ("b", "b", "X"), ("c", "c", "X")]])
        report = evaluate(gold, gold, {"a"})
        assert report.n_tokens == 3
        assert report.n_unknown == 2
        # all-token counts decompose into known + unknown
        assert report.n_tokens - report.n_unknown == 1

    def test_unknown_matching_ignores_capitalization(self):
        gold = _annotated([[("Haus", "haus", "N")]])
        report = evaluate(gold, gold, {"haus"})
        assert report.n_unknown == 0

    def test_token_count_mismatch_rejected(self):
        gold = _annotated([[("a", "a", "X")]])
        pred = _annotated([[("a", "a", "X"), ("b", "b", "X")]])
        with pytest.raises(ValueError):
            evaluate(gold, pred, set())

    def test_json_shape(self):
        gold = _annotated([[("a", "a", "X")]])
        data = evaluate(gold, gold, {"a"}).to_dict()
        assert data["tag"]["all"] == 1.0
        assert data["tokens"] == 1


class TestSyntheticGenerator:
    def test_seed_determinism_byte_identical(self):
        spec = default_spec(train_tokens=300, dev_tokens=50, test_tokens=50)
        a = generate_synthetic_corpus(42, spec)
        b = generate_synthetic_corpus(42, spec)
        assert render_corpus(a.train, "tsv") == render_corpus(b.train, "tsv")
        assert render_corpus(a.test, "tsv") == render_corpus(b.test, "tsv")
        c = generate_synthetic_corpus(43, spec)
        assert render_corpus(a.train, "tsv") != render_corpus(c.train, "tsv")

    def test_paradigm_arithmetic(self):
        slots = tuple(
            ParadigmSlot(suffix, f"X|S={i}")
            for i, suffix in enumerate(["o", "es", "e", "en", "imos"])
        )
        spec = SyntheticSpec(
            classes=(ParadigmClass("only", "X", "", slots, 100),),
            train_tokens=10, dev_tokens=10, test_tokens=10,
        )
        corpus = generate_synthetic_corpus(1, spec)
        forms = {form for form, _, _ in corpus.vocabulary}
        assert len(forms) == 500

    def test_no_sharing_means_no_ambiguity(self):
        spec = default_spec(train_tokens=200, dev_tokens=50, test_tokens=50)
        corpus = generate_synthetic_corpus(7, spec)
        assert corpus.ambiguous_token_rate(corpus.test) == 0.0

    def test_syncretic_spec_is_ambiguous(self):
        spec = syncretic_spec(1500, 300, 500)
        corpus = generate_synthetic_corpus(7, spec)
        assert corpus.syncretic_token_rate(corpus.test, spec) >= 0.20
        assert corpus.ambiguous_token_rate(corpus.test) > 0.0

    def test_invalid_spec_rejected(self):
        with pytest.raises(ValueError):
            SyntheticSpec(classes=()).validate()
        bad = SyntheticSpec(
            classes=(
                ParadigmClass("x", "X", "", (ParadigmSlot("", "X"),), 0),
            )
        )
        with pytest.raises(ValueError):
            bad.validate()

    def test_vocabulary_helpers(self):
        spec = default_spec(train_tokens=200, dev_tokens=50, test_tokens=50)
        corpus = generate_synthetic_corpus(3, spec)
        vocab = corpus_vocabulary(corpus.train)
        assert vocab
        assert all(v == v.lower() for v in vocab)
