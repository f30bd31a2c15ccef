"""Corpus I/O, evaluation metrics and a synthetic-language generator.

Two file formats are supported, both UTF-8 with blank-line sentence
separation: CoNLL-09 style TSV with a configurable 1-based column map
(defaults: form 2, lemma 3, POS 5, feats 7, feats '|'-separated, '_' for
empty) and a simple 3-column TSV (form, lemma, tag).

Evaluation reports tag, lemma and tag+lemma token accuracies over all
tokens and over unknown forms, where a form is unknown when it does not
occur in the training vocabulary (capitalization-insensitively); lemma
comparison also ignores capitalization.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .features import MorphTag

__all__ = [
    "Token",
    "Sentence",
    "ColumnMap",
    "CorpusFormatError",
    "read_corpus",
    "write_corpus",
    "render_corpus",
    "truncate_corpus",
    "corpus_vocabulary",
    "tagging_data",
    "lemmatization_data",
    "joint_data",
    "EvalReport",
    "evaluate",
    "ParadigmSlot",
    "ParadigmClass",
    "SyntheticSpec",
    "SyntheticCorpus",
    "default_spec",
    "syncretic_spec",
    "generate_synthetic_corpus",
]

logger = logging.getLogger(__name__)


@dataclass
class Token:
    form: str
    lemma: Optional[str] = None
    tag: Optional[MorphTag] = None

    def __post_init__(self):
        if not self.form:
            raise ValueError("token form must be non-empty")


Sentence = list[Token]


class CorpusFormatError(ValueError):
    """Malformed corpus file; carries the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class ColumnMap:
    """1-based column indices, CoNLL-09 defaults."""

    form: int = 2
    lemma: int = 3
    pos: int = 5
    feats: int = 7


def read_corpus(
    path: str | Path,
    format: str = "conll09",
    columns: Optional[ColumnMap] = None,
    lemma_rewrites: Optional[dict[str, str]] = None,
) -> list[Sentence]:
    """Parse an annotated corpus; sentences are separated by blank lines.

    ``lemma_rewrites`` maps forms to replacement lemmata applied at read
    time (for corpora with inconsistent lemma conventions).
    """
    with open(path, encoding="utf-8") as fh:
        return parse_corpus(fh, format=format, columns=columns,
                            lemma_rewrites=lemma_rewrites)


def parse_corpus(
    lines: Iterable[str],
    format: str = "conll09",
    columns: Optional[ColumnMap] = None,
    lemma_rewrites: Optional[dict[str, str]] = None,
) -> list[Sentence]:
    if format == "conll09":
        cmap = columns or ColumnMap()
        needed = max(cmap.form, cmap.lemma, cmap.pos, cmap.feats)
    elif format == "tsv":
        needed = 1
    else:
        raise ValueError(f"unknown corpus format {format!r}")
    sentences: list[Sentence] = []
    current: Sentence = []
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\n").rstrip("\r")
        if not line.strip():
            if current:
                sentences.append(current)
                current = []
            continue
        fields = line.split("\t")
        if format == "conll09":
            if len(fields) < needed:
                raise CorpusFormatError(
                    f"expected at least {needed} columns, found {len(fields)}",
                    lineno,
                )
            form = fields[cmap.form - 1]
            lemma = _unset(fields[cmap.lemma - 1])
            pos = _unset(fields[cmap.pos - 1])
            feats = _unset(fields[cmap.feats - 1])
            tag = None
            if pos is not None:
                attrs = tuple(a for a in feats.split("|") if a) if feats else ()
                tag = MorphTag(pos, attrs)
        else:
            if len(fields) < 1 or len(fields) > 3:
                raise CorpusFormatError(
                    f"expected 1-3 columns, found {len(fields)}", lineno
                )
            form = fields[0]
            lemma = _unset(fields[1]) if len(fields) > 1 else None
            tag_text = _unset(fields[2]) if len(fields) > 2 else None
            tag = MorphTag.parse(tag_text) if tag_text else None
        if not form:
            raise CorpusFormatError("empty form", lineno)
        if lemma_rewrites and form in lemma_rewrites:
            lemma = lemma_rewrites[form]
        current.append(Token(form=form, lemma=lemma, tag=tag))
    if current:
        sentences.append(current)
    return sentences


def _unset(value: str) -> Optional[str]:
    return None if value == "_" or value == "" else value


def render_corpus(
    sentences: Sequence[Sentence],
    format: str = "conll09",
    columns: Optional[ColumnMap] = None,
) -> str:
    """Serialize sentences to the given format (inverse of parse_corpus)."""
    out: list[str] = []
    if format == "conll09":
        cmap = columns or ColumnMap()
        width = max(cmap.form, cmap.lemma, cmap.pos, cmap.feats, 1)
        for sentence in sentences:
            for i, token in enumerate(sentence):
                row = ["_"] * width
                row[0] = str(i + 1)
                row[cmap.form - 1] = token.form
                row[cmap.lemma - 1] = token.lemma if token.lemma is not None else "_"
                if token.tag is not None:
                    row[cmap.pos - 1] = token.tag.pos
                    row[cmap.feats - 1] = "|".join(token.tag.attrs) or "_"
                out.append("\t".join(row))
            out.append("")
    elif format == "tsv":
        for sentence in sentences:
            for token in sentence:
                out.append(
                    "\t".join(
                        [
                            token.form,
                            token.lemma if token.lemma is not None else "_",
                            token.tag.render() if token.tag is not None else "_",
                        ]
                    )
                )
            out.append("")
    else:
        raise ValueError(f"unknown corpus format {format!r}")
    return "\n".join(out) + ("\n" if out else "")


def write_corpus(
    sentences: Sequence[Sentence],
    path: str | Path,
    format: str = "conll09",
    columns: Optional[ColumnMap] = None,
) -> None:
    Path(path).write_text(render_corpus(sentences, format, columns), encoding="utf-8")


def truncate_corpus(sentences: Sequence[Sentence], max_tokens: Optional[int]) -> list[Sentence]:
    """First sentences up to a token budget; the crossing sentence is kept."""
    if max_tokens is None:
        return list(sentences)
    if max_tokens <= 0:
        raise ValueError("max_tokens must be positive")
    out: list[Sentence] = []
    total = 0
    for sentence in sentences:
        if total >= max_tokens:
            break
        out.append(sentence)
        total += len(sentence)
    return out


def corpus_vocabulary(sentences: Iterable[Sentence]) -> set[str]:
    """Lowercased form vocabulary, for unknown-form bookkeeping."""
    return {token.form.lower() for sentence in sentences for token in sentence}


# ----------------------------------------------------------------------
# conversions to estimator inputs
# ----------------------------------------------------------------------


def tagging_data(sentences: Sequence[Sentence]):
    X = [[t.form for t in s] for s in sentences]
    y = [[t.tag for t in s] for s in sentences]
    return X, y


def lemmatization_data(sentences: Sequence[Sentence]):
    X = [(t.form, t.tag) for s in sentences for t in s]
    y = [t.lemma for s in sentences for t in s]
    return X, y


def joint_data(sentences: Sequence[Sentence]):
    X = [[t.form for t in s] for s in sentences]
    y = [[(t.tag, t.lemma) for t in s] for s in sentences]
    return X, y


# ----------------------------------------------------------------------
# evaluation
# ----------------------------------------------------------------------


@dataclass
class EvalReport:
    n_tokens: int
    n_unknown: int
    tag_all: Optional[float]
    tag_unk: Optional[float]
    lemma_all: Optional[float]
    lemma_unk: Optional[float]
    joint_all: Optional[float]
    joint_unk: Optional[float]

    @property
    def unknown_rate(self) -> float:
        return self.n_unknown / self.n_tokens if self.n_tokens else 0.0

    def to_dict(self) -> dict:
        return {
            "tokens": self.n_tokens,
            "unknown_tokens": self.n_unknown,
            "unknown_rate": self.unknown_rate,
            "tag": {"all": self.tag_all, "unk": self.tag_unk},
            "lemma": {"all": self.lemma_all, "unk": self.lemma_unk},
            "tag+lemma": {"all": self.joint_all, "unk": self.joint_unk},
        }

    def table(self) -> str:
        def fmt(v):
            return "    -" if v is None else f"{100 * v:5.2f}"

        lines = [
            f"tokens: {self.n_tokens}  unknown: {self.n_unknown} "
            f"({100 * self.unknown_rate:.2f}%)",
            "metric       all    unk",
            f"tag        {fmt(self.tag_all)}  {fmt(self.tag_unk)}",
            f"lemma      {fmt(self.lemma_all)}  {fmt(self.lemma_unk)}",
            f"tag+lemma  {fmt(self.joint_all)}  {fmt(self.joint_unk)}",
        ]
        return "\n".join(lines)


def evaluate(
    gold: Sequence[Sentence],
    predicted: Sequence[Sentence],
    train_vocabulary: Iterable[str],
) -> EvalReport:
    """Token accuracies of ``predicted`` against ``gold``.

    Lemma and unknown-form matching ignore capitalization; tags compare by
    exact canonical rendering.  Unknown accuracies are None when the
    unknown set is empty, and a metric is None when gold lacks that
    annotation anywhere.
    """
    gold_tokens = [t for s in gold for t in s]
    pred_tokens = [t for s in predicted for t in s]
    if len(gold_tokens) != len(pred_tokens):
        raise ValueError(
            f"token count mismatch: gold {len(gold_tokens)}, "
            f"predicted {len(pred_tokens)}"
        )
    if not gold_tokens:
        raise ValueError("cannot evaluate an empty corpus")
    vocab = {v.lower() for v in train_vocabulary}
    have_tags = all(t.tag is not None for t in gold_tokens)
    have_lemmata = all(t.lemma is not None for t in gold_tokens)

    counts = {"all": [0, 0, 0, 0], "unk": [0, 0, 0, 0]}  # n, tag, lemma, joint
    for g, p in zip(gold_tokens, pred_tokens):
        unknown = g.form.lower() not in vocab
        tag_ok = (
            have_tags and p.tag is not None and p.tag.render() == g.tag.render()
        )
        lemma_ok = (
            have_lemmata
            and p.lemma is not None
            and p.lemma.lower() == g.lemma.lower()
        )
        for key in (["all", "unk"] if unknown else ["all"]):
            counts[key][0] += 1
            counts[key][1] += int(tag_ok)
            counts[key][2] += int(lemma_ok)
            counts[key][3] += int(tag_ok and lemma_ok)

    def ratio(bucket, metric, enabled):
        n = counts[bucket][0]
        if not enabled or n == 0:
            return None
        return counts[bucket][metric] / n

    return EvalReport(
        n_tokens=counts["all"][0],
        n_unknown=counts["unk"][0],
        tag_all=ratio("all", 1, have_tags),
        tag_unk=ratio("unk", 1, have_tags),
        lemma_all=ratio("all", 2, have_lemmata),
        lemma_unk=ratio("unk", 2, have_lemmata),
        joint_all=ratio("all", 3, have_tags and have_lemmata),
        joint_unk=ratio("unk", 3, have_tags and have_lemmata),
    )


# ----------------------------------------------------------------------
# synthetic language generator
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ParadigmSlot:
    suffix: str
    tag: str  # canonical tag rendering


@dataclass(frozen=True)
class ParadigmClass:
    """An inflection class: lemma = stem + lemma_suffix, forms = stem + slot."""

    name: str
    pos: str
    lemma_suffix: str
    slots: tuple[ParadigmSlot, ...]
    n_lemmata: int
    stem_vowels: str = "aeiou"       # pool for the stem-final vowel
    context_word: Optional[tuple[str, str]] = None  # (form, tag) introducer
    slot_weights: Optional[tuple[float, ...]] = None
    frequency: float = 1.0


@dataclass(frozen=True)
class SyntheticSpec:
    classes: tuple[ParadigmClass, ...]
    train_tokens: int = 5000
    dev_tokens: int = 1000
    test_tokens: int = 1000
    context_drop: float = 0.2
    shared_stem_rate: float = 0.0    # stems of later classes reused from class 0
    zipf_exponent: float = 1.0
    units_per_sentence: tuple[int, int] = (1, 3)

    def validate(self) -> None:
        if not self.classes:
            raise ValueError("spec needs at least one paradigm class")
        for cls in self.classes:
            if cls.n_lemmata < 1:
                raise ValueError(f"class {cls.name}: n_lemmata must be >= 1")
            if not cls.slots:
                raise ValueError(f"class {cls.name}: needs at least one slot")
            if cls.slot_weights is not None and len(cls.slot_weights) != len(cls.slots):
                raise ValueError(f"class {cls.name}: slot_weights length mismatch")
            if not cls.stem_vowels:
                raise ValueError(f"class {cls.name}: stem_vowels must be non-empty")
        for name in ("train_tokens", "dev_tokens", "test_tokens"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.context_drop <= 1.0:
            raise ValueError("context_drop must be in [0, 1]")
        if not 0.0 <= self.shared_stem_rate <= 1.0:
            raise ValueError("shared_stem_rate must be in [0, 1]")


@dataclass
class SyntheticCorpus:
    train: list[Sentence]
    dev: list[Sentence]
    test: list[Sentence]
    vocabulary: list[tuple[str, str, str]]  # (form, lemma, tag rendering)

    def analyses(self) -> dict[str, set[tuple[str, str]]]:
        table: dict[str, set[tuple[str, str]]] = {}
        for form, lemma, tag in self.vocabulary:
            table.setdefault(form, set()).add((lemma, tag))
        return table

    def ambiguous_token_rate(self, sentences: Sequence[Sentence]) -> float:
        """Fraction of tokens whose form has several attested analyses."""
        table = self.analyses()
        tokens = [t for s in sentences for t in s]
        if not tokens:
            return 0.0
        n = sum(1 for t in tokens if len(table.get(t.form, set())) > 1)
        return n / len(tokens)

    def syncretic_token_rate(
        self, sentences: Sequence[Sentence], spec: SyntheticSpec
    ) -> float:
        """Fraction of tokens whose form shape admits several tag analyses.

        A form admits an analysis for a (class, slot) when it decomposes as
        attested-stem + slot-suffix, where the stem may be attested in any
        class; this counts forms like a plural-looking singular even when
        only one reading exists in the lexicon.
        """
        stems = {form for form, lemma, tag in self.vocabulary
                 for cls in spec.classes for slot in cls.slots
                 if tag == slot.tag and form.endswith(slot.suffix)
                 for form in [form[: len(form) - len(slot.suffix)] if slot.suffix else form]}
        suffixes = [(slot.suffix, slot.tag) for cls in spec.classes for slot in cls.slots]

        def n_analyses(form: str) -> int:
            tags = set()
            for suffix, tag in suffixes:
                stem = form[: len(form) - len(suffix)] if suffix else form
                if (not suffix or form.endswith(suffix)) and stem in stems:
                    tags.add(tag)
            return len(tags)

        tokens = [t for s in sentences for t in s]
        if not tokens:
            return 0.0
        n = sum(1 for t in tokens if n_analyses(t.form) > 1)
        return n / len(tokens)


_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


def _make_stem(rng: random.Random, final_vowels: str) -> str:
    syllables = rng.randint(1, 2)
    stem = ""
    for _ in range(syllables):
        stem += rng.choice(_CONSONANTS) + rng.choice(_VOWELS)
    stem += rng.choice(_CONSONANTS) + rng.choice(final_vowels) + rng.choice(_CONSONANTS)
    return stem


def default_spec(
    train_tokens: int = 5000, dev_tokens: int = 1000, test_tokens: int = 1000
) -> SyntheticSpec:
    """Two verb conjugations sharing their plural ending, plus nouns.

    The shared 'en' ending makes the conjugation of an unseen plural form
    ambiguous; the stem-final vowel decides the class, so the distinction
    is learnable from form suffixes.
    """
    person = lambda num, per: (f"V|Num={num}|Per={per}",)
    ir_slots = (
        ParadigmSlot("o", person("Sg", "1")[0]),
        ParadigmSlot("es", person("Sg", "2")[0]),
        ParadigmSlot("e", person("Sg", "3")[0]),
        ParadigmSlot("en", person("Pl", "3")[0]),
        ParadigmSlot("imos", person("Pl", "1")[0]),
    )
    er_slots = (
        ParadigmSlot("o", person("Sg", "1")[0]),
        ParadigmSlot("es", person("Sg", "2")[0]),
        ParadigmSlot("e", person("Sg", "3")[0]),
        ParadigmSlot("en", person("Pl", "3")[0]),
        ParadigmSlot("emos", person("Pl", "1")[0]),
    )
    noun_slots = (
        ParadigmSlot("", "N|Num=Sg"),
        ParadigmSlot("s", "N|Num=Pl"),
    )
    return SyntheticSpec(
        classes=(
            ParadigmClass("verbs_ir", "V", "ir", ir_slots, 40, "i", ("po", "P")),
            ParadigmClass("verbs_er", "V", "er", er_slots, 40, "e", ("po", "P")),
            ParadigmClass("nouns", "N", "", noun_slots, 60, "aou", ("da", "D")),
        ),
        train_tokens=train_tokens,
        dev_tokens=dev_tokens,
        test_tokens=test_tokens,
        context_drop=0.2,
    )


def syncretic_spec(
    train_tokens: int = 3000, dev_tokens: int = 1000, test_tokens: int = 1000
) -> SyntheticSpec:
    """Noun plurals and verb plurals share the surface ending 'en'.

    Every 'Xen' form looks like both a noun plural (lemma X) and a verb
    plural (lemma Xa), and the introducing function word is frequently
    dropped, so context alone underdetermines the tag.  A long Zipf tail
    leaves many plural forms unseen while their stems are attested, which
    is where knowing the plausible lemma decides the tag.  A few stems are
    shared between the classes and genuinely ambiguous.
    """
    noun_slots = (
        ParadigmSlot("", "N|Num=Sg"),
        ParadigmSlot("en", "N|Num=Pl"),
    )
    verb_slots = (
        ParadigmSlot("t", "V|Num=Sg"),
        ParadigmSlot("en", "V|Num=Pl"),
    )
    return SyntheticSpec(
        classes=(
            ParadigmClass(
                "nouns", "N", "", noun_slots, 400, "aeiou", ("da", "D"),
                slot_weights=(0.45, 0.55),
            ),
            ParadigmClass(
                "verbs", "V", "a", verb_slots, 400, "aeiou", ("po", "P"),
                slot_weights=(0.45, 0.55),
            ),
        ),
        train_tokens=train_tokens,
        dev_tokens=dev_tokens,
        test_tokens=test_tokens,
        context_drop=0.4,
        shared_stem_rate=0.15,
        zipf_exponent=0.3,
    )


def generate_synthetic_corpus(seed: int, spec: SyntheticSpec) -> SyntheticCorpus:
    """Deterministic toy corpus: identical (seed, spec) give identical output."""
    spec.validate()
    rng = random.Random(seed)

    # build lexemes class by class; stems are globally unique except for
    # deliberate sharing with class 0, which creates ambiguous forms
    class_stems: list[list[str]] = []
    used_stems: set[str] = set()
    used_forms: dict[str, str] = {}  # form -> stem owning it
    lexemes: list[tuple[int, str, str]] = []  # (class index, stem, lemma)

    def forms_of(cls: ParadigmClass, stem: str) -> list[str]:
        return [stem + slot.suffix for slot in cls.slots]

    for ci, cls in enumerate(spec.classes):
        stems: list[str] = []
        for li in range(cls.n_lemmata):
            share = (
                ci > 0
                and class_stems[0]
                and rng.random() < spec.shared_stem_rate
            )
            if share:
                candidates = [s for s in class_stems[0] if s not in stems]
                if candidates:
                    stem = rng.choice(candidates)
                    stems.append(stem)
                    lexemes.append((ci, stem, stem + cls.lemma_suffix))
                    continue
            for _ in range(1000):
                stem = _make_stem(rng, cls.stem_vowels)
                if stem in used_stems:
                    continue
                if any(f in used_forms for f in forms_of(cls, stem)):
                    continue
                break
            else:
                raise ValueError(f"cannot find a fresh stem for class {cls.name}")
            used_stems.add(stem)
            for f in forms_of(cls, stem):
                used_forms[f] = stem
            stems.append(stem)
            lexemes.append((ci, stem, stem + cls.lemma_suffix))
        class_stems.append(stems)

    vocabulary: list[tuple[str, str, str]] = []
    for ci, stem, lemma in lexemes:
        cls = spec.classes[ci]
        for slot in cls.slots:
            vocabulary.append((stem + slot.suffix, lemma, slot.tag))
    for cls in spec.classes:
        if cls.context_word is not None:
            form, tag = cls.context_word
            entry = (form, form, tag)
            if entry not in vocabulary:
                vocabulary.append(entry)

    class_weights = [cls.frequency * cls.n_lemmata for cls in spec.classes]
    zipf = [
        [1.0 / (r + 1) ** spec.zipf_exponent for r in range(cls.n_lemmata)]
        for cls in spec.classes
    ]

    def make_token(ci: int) -> list[Token]:
        cls = spec.classes[ci]
        li = rng.choices(range(cls.n_lemmata), weights=zipf[ci])[0]
        stem = class_stems[ci][li]
        weights = cls.slot_weights or [1.0] * len(cls.slots)
        slot = rng.choices(cls.slots, weights=weights)[0]
        tokens = []
        if cls.context_word is not None and rng.random() >= spec.context_drop:
            form, tag = cls.context_word
            tokens.append(Token(form, form, MorphTag.parse(tag)))
        tokens.append(
            Token(stem + slot.suffix, stem + cls.lemma_suffix, MorphTag.parse(slot.tag))
        )
        return tokens

    def make_split(n_tokens: int) -> list[Sentence]:
        sentences: list[Sentence] = []
        total = 0
        lo, hi = spec.units_per_sentence
        while total < n_tokens:
            sentence: Sentence = []
            for _ in range(rng.randint(lo, hi)):
                ci = rng.choices(range(len(spec.classes)), weights=class_weights)[0]
                sentence.extend(make_token(ci))
            sentences.append(sentence)
            total += len(sentence)
        return sentences

    return SyntheticCorpus(
        train=make_split(spec.train_tokens),
        dev=make_split(spec.dev_tokens),
        test=make_split(spec.test_tokens),
        vocabulary=vocabulary,
    )
