import gzip
import json

import pytest

from lemtag.baselines import MostFrequentLemmatizer, TransducerLemmatizer
from lemtag.corpus import default_spec, generate_synthetic_corpus, joint_data, lemmatization_data, tagging_data
from lemtag.features import Lexicon
from lemtag.joint import JointTaggerLemmatizer
from lemtag.lemmatizer import TreeLemmatizer
from lemtag.model_io import MAGIC, ModelFormatError, load_model, save_model
from lemtag.pipeline import MorphPipeline
from lemtag.tagger import CrfTagger


@pytest.fixture(scope="module")
def corpus():
    return generate_synthetic_corpus(5, default_spec(600, 100, 100))


def _assert_same_predictions(kind, original, restored, corpus):
    forms = [[t.form for t in s] for s in corpus.test[:25]]
    if kind in ("simple", "jck"):
        X = [(t.form, t.tag) for s in corpus.test[:25] for t in s]
        assert original.predict(X) == restored.predict(X)
    elif kind == "lemmatizer":
        X = [(t.form, t.tag) for s in corpus.test[:25] for t in s]
        assert original.predict(X) == restored.predict(X)
    elif kind == "tagger":
        a = [[t.render() for t in original.tag_sentence(f)] for f in forms]
        b = [[t.render() for t in restored.tag_sentence(f)] for f in forms]
        assert a == b
    else:
        a = [[(t.render(), l) for t, l in original.decode(f)] for f in forms]
        b = [[(t.render(), l) for t, l in restored.decode(f)] for f in forms]
        assert a == b


class TestRoundTrips:
    def test_simple(self, corpus, tmp_path):
        X, y = lemmatization_data(corpus.train)
        model = MostFrequentLemmatizer().fit(X, y)
        path = tmp_path / "m.lemtag"
        save_model(model, path)
        kind, restored = load_model(path)
        assert kind == "simple"
        _assert_same_predictions(kind, model, restored, corpus)

    def test_transducer(self, corpus, tmp_path):
        X, y = lemmatization_data(corpus.train)
        model = TransducerLemmatizer(iterations=3, seed=7).fit(X, y)
        path = tmp_path / "m.lemtag"
        save_model(model, path)
        kind, restored = load_model(path)
        assert kind == "jck"
        assert restored.alphabet_ == model.alphabet_
        _assert_same_predictions(kind, model, restored, corpus)

    def test_lemmatizer_with_lexicon(self, corpus, tmp_path):
        lexicon = Lexicon("lem", frozenset(
            t.lemma for s in corpus.train for t in s))
        X, y = lemmatization_data(corpus.train)
        model = TreeLemmatizer(min_pair_count=2, max_iter=40,
                               lexicons=[lexicon]).fit(X, y)
        path = tmp_path / "m.lemtag"
        save_model(model, path)
        kind, restored = load_model(path)
        assert kind == "lemmatizer"
        assert restored.lexicons[0].entries == lexicon.entries
        _assert_same_predictions(kind, model, restored, corpus)

    @pytest.mark.parametrize("order", [1, 2])
    def test_tagger(self, corpus, tmp_path, order):
        X, y = tagging_data(corpus.train)
        model = CrfTagger(order=order, epochs=3, seed=1).fit(X, y)
        path = tmp_path / "m.lemtag"
        save_model(model, path)
        kind, restored = load_model(path)
        assert kind == "tagger"
        _assert_same_predictions(kind, model, restored, corpus)

    def test_pipeline(self, corpus, tmp_path):
        X, y = joint_data(corpus.train)
        model = MorphPipeline(
            tagger_params={"order": 1, "epochs": 3},
            lemmatizer_params={"max_iter": 40},
        ).fit(X, y)
        path = tmp_path / "m.lemtag"
        save_model(model, path)
        kind, restored = load_model(path)
        assert kind == "pipeline"
        _assert_same_predictions(kind, model, restored, corpus)

    def test_joint(self, corpus, tmp_path):
        X, y = joint_data(corpus.train)
        model = JointTaggerLemmatizer(
            epochs=2, seed=1, tagger_params={"order": 1, "epochs": 3}
        ).fit(X, y)
        path = tmp_path / "m.lemtag"
        save_model(model, path)
        kind, restored = load_model(path)
        assert kind == "joint"
        _assert_same_predictions(kind, model, restored, corpus)


class TestFormatChecks:
    def test_not_a_model_file(self, tmp_path):
        path = tmp_path / "junk"
        path.write_bytes(b"not gzip at all")
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m"
        with gzip.open(path, "wt") as fh:
            json.dump({"magic": "other", "version": [1, 0]}, fh)
        with pytest.raises(ModelFormatError, match="magic"):
            load_model(path)

    def test_newer_major_version_rejected(self, corpus, tmp_path):
        X, y = lemmatization_data(corpus.train)
        model = MostFrequentLemmatizer().fit(X, y)
        path = tmp_path / "m"
        save_model(model, path)
        with gzip.open(path, "rt") as fh:
            payload = json.load(fh)
        payload["version"] = [99, 0]
        with gzip.open(path, "wt") as fh:
            json.dump(payload, fh)
        with pytest.raises(ModelFormatError, match="newer"):
            load_model(path)

    def test_magic_constant(self):
        assert MAGIC == "lemtag-model"
