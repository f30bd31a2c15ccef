"""Tag-then-lemmatize pipeline: a tagger and a lemmatizer trained together.

The lemmatizer is trained on gold tags; at prediction time it conditions on
the tagger's output.
"""

from __future__ import annotations

from typing import Optional, Sequence, Union

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .features import MorphTag
from .lemmatizer import TreeLemmatizer
from .tagger import CrfTagger

__all__ = ["MorphPipeline"]

TagLike = Union[MorphTag, str]


class MorphPipeline(BaseEstimator):
    """Composition of CrfTagger and TreeLemmatizer behind one fit/predict."""

    def __init__(
        self,
        tagger_params: Optional[dict] = None,
        lemmatizer_params: Optional[dict] = None,
        seed: int = 42,
    ):
        self.tagger_params = tagger_params
        self.lemmatizer_params = lemmatizer_params
        self.seed = seed

    def fit(
        self,
        X: Sequence[Sequence[str]],
        y: Sequence[Sequence[tuple[TagLike, str]]],
    ) -> "MorphPipeline":
        tagger_params = dict(self.tagger_params or {})
        tagger_params.setdefault("seed", self.seed)
        self.tagger_ = CrfTagger(**tagger_params)
        self.tagger_.fit(X, [[t for t, _ in sent] for sent in y])
        self.lemmatizer_ = TreeLemmatizer(**(self.lemmatizer_params or {}))
        flat_X = [
            (form, tag)
            for forms, sent in zip(X, y)
            for form, (tag, _) in zip(forms, sent)
        ]
        flat_y = [lemma for sent in y for _, lemma in sent]
        self.lemmatizer_.fit(flat_X, flat_y)
        return self

    def decode(self, forms: Sequence[str]) -> list[tuple[MorphTag, str]]:
        if not hasattr(self, "tagger_"):
            raise NotFittedError("MorphPipeline is not fitted yet")
        tags = self.tagger_.tag_sentence(forms)
        return [
            (tag, self.lemmatizer_.predict_one(form, tag))
            for form, tag in zip(forms, tags)
        ]

    def predict(self, X: Sequence[Sequence[str]]) -> list[list[tuple[MorphTag, str]]]:
        return [self.decode(forms) for forms in X]
