"""Sparse feature extraction for candidate lemmata.

Feature names are tab-separated field strings with a leading group tag, so
no two groups can collide.  Every base feature is additionally emitted
conjoined with the POS and with each morphological attribute separately;
e.g. a noun with attributes Common and Plural yields each base feature
three extra times (with POS, with Common, with Plural).

Extraction is pure.  A FeatureDictionary grows single-writer during
training and is frozen for concurrent read-only inference.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .edit_tree import EditTree, alignment, apply_tree

__all__ = [
    "MorphTag",
    "FeatureConfig",
    "FeatureDictionary",
    "FeatureVector",
    "Lexicon",
    "lemma_feature_counts",
    "build_lexicon_from_text",
]


@dataclass(frozen=True, order=True)
class MorphTag:
    """A POS plus a set of morphological attribute strings.

    Attributes are stored sorted and duplicate-free so that rendering and
    equality are canonical.
    """

    pos: str
    attrs: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.pos:
            raise ValueError("POS must be non-empty")
        canonical = tuple(sorted(set(self.attrs)))
        if canonical != self.attrs:
            object.__setattr__(self, "attrs", canonical)

    def render(self) -> str:
        if not self.attrs:
            return self.pos
        return self.pos + "|" + "|".join(self.attrs)

    @classmethod
    def parse(cls, text: str) -> "MorphTag":
        pos, _, rest = text.partition("|")
        attrs = tuple(a for a in rest.split("|") if a) if rest else ()
        return cls(pos, attrs)


@dataclass(frozen=True)
class FeatureConfig:
    """Which feature groups fire and their size caps (defaults as shipped)."""

    max_affix_len: int = 10
    max_context_len: int = 6
    use_align: bool = True
    use_lemma: bool = True
    use_dict: bool = True
    conjoin_attrs: bool = True


class FeatureVector:
    """Sparse index -> count mapping backed by parallel numpy arrays."""

    __slots__ = ("indices", "counts")

    def __init__(self, indices: np.ndarray, counts: np.ndarray):
        self.indices = indices
        self.counts = counts

    def __len__(self) -> int:
        return len(self.indices)

    def dot(self, weights: np.ndarray) -> float:
        if len(self.indices) == 0:
            return 0.0
        return float(weights[self.indices] @ self.counts)

    def items(self):
        return zip(self.indices.tolist(), self.counts.tolist())


class FeatureDictionary:
    """Bijective feature-name <-> dense-index mapping with a frozen flag.

    In growing mode unseen names get the next index; once frozen, unseen
    names map to None instead of growing the dictionary.
    """

    def __init__(self, names: Iterable[str] = ()):
        self._names: list[str] = list(names)
        self._index: dict[str, int] = {n: i for i, n in enumerate(self._names)}
        if len(self._index) != len(self._names):
            raise ValueError("duplicate feature names")
        self.frozen = False

    def __len__(self) -> int:
        return len(self._names)

    def intern(self, name: str) -> Optional[int]:
        idx = self._index.get(name)
        if idx is None and not self.frozen:
            idx = len(self._names)
            self._names.append(name)
            self._index[name] = idx
        return idx

    def freeze(self) -> "FeatureDictionary":
        self.frozen = True
        return self

    def name(self, index: int) -> str:
        return self._names[index]

    def names(self) -> list[str]:
        return list(self._names)

    def vectorize(self, counts: Counter) -> FeatureVector:
        """Intern a name->count multiset into a FeatureVector.

        Unknown names are dropped when frozen.
        """
        idx: list[int] = []
        val: list[float] = []
        intern = self.intern
        for name, count in counts.items():
            i = intern(name)
            if i is not None:
                idx.append(i)
                val.append(count)
        return FeatureVector(
            np.asarray(idx, dtype=np.int64), np.asarray(val, dtype=np.float64)
        )


@dataclass(frozen=True)
class Lexicon:
    """Named word list with exact-match lookup.

    Frequency thresholding belongs to list construction (see
    :func:`build_lexicon_from_text`); at runtime this is a plain set.
    """

    name: str
    entries: frozenset[str] = field(default_factory=frozenset)

    def __contains__(self, word: str) -> bool:
        return word in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def load(cls, path: str | Path, name: Optional[str] = None) -> "Lexicon":
        """Read a UTF-8 word list, one word per line, '#' starts a comment."""
        path = Path(path)
        words = set()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                word = line.split("#", 1)[0].strip()
                if word:
                    words.add(word)
        return cls(name or path.stem, frozenset(words))


def build_lexicon_from_text(
    lines: Iterable[str], min_count: int = 1
) -> list[str]:
    """Count whitespace tokens and keep those occurring at least min_count times."""
    counts: Counter[str] = Counter()
    for line in lines:
        counts.update(line.split())
    return sorted(w for w, c in counts.items() if c >= min_count)


def _capitalization_variants(lemma: str) -> list[tuple[str, str]]:
    return [
        ("low", lemma.lower()),
        ("first", lemma[:1].upper() + lemma[1:].lower()),
        ("up", lemma.upper()),
        ("asis", lemma),
    ]


def lemma_feature_counts(
    form: str,
    lemma: str,
    tree: Optional[EditTree],
    tree_id: Optional[int],
    tag: MorphTag,
    lexicons: Sequence[Lexicon] = (),
    cfg: FeatureConfig = FeatureConfig(),
    seen: bool = False,
) -> Counter:
    """Feature multiset for scoring candidate ``lemma`` for ``form`` under ``tag``.

    Groups: the tree itself, the (tree, form) pair, form affixes conjoined
    with the tree, alignment pairs and their character contexts, the lemma
    string and its affixes, and lexicon membership of capitalization
    variants.  Candidates without an applicable tree (``tree is None``) get
    only the lemma and lexicon groups plus a seen-lemma indicator.
    """
    base: Counter = Counter()
    lowered = form.lower()
    k_affix = cfg.max_affix_len
    if tree is not None:
        tid = str(tree_id)
        base["t\t" + tid] = 1
        base["tw\t" + tid + "\t" + lowered] = 1
        for k in range(1, min(k_affix, len(lowered)) + 1):
            base["tp\t" + tid + "\t" + lowered[:k]] = 1
            base["ts\t" + tid + "\t" + lowered[-k:]] = 1
        if cfg.use_align:
            produced = apply_tree(tree, lowered)
            if produced is not None:
                _alignment_features(base, tree, lowered, produced, cfg.max_context_len)
    if seen:
        base["seen"] = 1
    if cfg.use_lemma:
        base["l\t" + lemma] = 1
        for k in range(1, min(k_affix, len(lemma)) + 1):
            base["lp\t" + lemma[:k]] = 1
            base["ls\t" + lemma[-k:]] = 1
    if cfg.use_dict:
        for lexicon in lexicons:
            for label, variant in _capitalization_variants(lemma):
                if variant in lexicon:
                    base["dict\t" + lexicon.name + "\t" + label] = 1
    return _conjoin(base, tag, cfg)


def _alignment_features(
    base: Counter, tree: EditTree, form: str, produced: str, max_ctx: int
) -> None:
    pairs = alignment(tree, form, produced)
    f_pos = 0
    l_pos = 0
    for a, b in pairs:
        pair_name = "a\t" + a + "\t" + b
        base[pair_name] += 1
        f_end = f_pos + len(a)
        l_end = l_pos + len(b)
        base["afl\t" + a + "\t" + b + "\t" + form[max(0, f_pos - max_ctx): f_pos]] += 1
        base["afr\t" + a + "\t" + b + "\t" + form[f_end: f_end + max_ctx]] += 1
        base["all\t" + a + "\t" + b + "\t" + produced[max(0, l_pos - max_ctx): l_pos]] += 1
        base["alr\t" + a + "\t" + b + "\t" + produced[l_end: l_end + max_ctx]] += 1
        f_pos = f_end
        l_pos = l_end


def _conjoin(base: Counter, tag: MorphTag, cfg: FeatureConfig) -> Counter:
    out: Counter = Counter()
    pos_suffix = "\tP\t" + tag.pos
    attr_suffixes = (
        ["\tM\t" + attr for attr in tag.attrs] if cfg.conjoin_attrs else []
    )
    for name, count in base.items():
        out[name] = count
        out[name + pos_suffix] = count
        for suffix in attr_suffixes:
            out[name + suffix] = count
    return out
