"""Lemmatization baselines: a frequency lookup and a character transducer.

The frequency baseline maps each (form, POS) pair to its most frequent
training lemma and falls back to the form itself for unknown pairs.

The transducer baseline rewrites a form segment by segment.  Training pairs
are aligned with edit trees; identical input/output segments become a COPY
symbol, the remaining output blocks form the output alphabet (kept only when
at least ``min_symbol_pairs`` distinct form-lemma pairs use them).  A
structured averaged perceptron with character-context features in a window
of six scores monotone segmentations, decoded with Viterbi over the segment
lattice.  Following the combined setup, prediction backs off to the
frequency table for seen (form, POS) pairs and only transduces unseen ones.
"""

from __future__ import annotations

import logging
import random
from collections import Counter, defaultdict
from typing import Optional, Sequence, Union

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .edit_tree import alignment, extract_tree
from .features import MorphTag

__all__ = [
    "MostFrequentLemmatizer",
    "TransducerLemmatizer",
    "AveragedWeights",
    "COPY",
    "align_pair",
]

logger = logging.getLogger(__name__)

COPY = "<copy>"
PosLike = Union[MorphTag, str]


class AveragedWeights:
    """Sparse perceptron weights with running averaging.

    ``average()`` equals the mean of the weight vectors after each processed
    example, computed without storing intermediate vectors.  ``advance()``
    must be called once per example, after any updates for it.
    """

    def __init__(self):
        self.current: dict[str, float] = defaultdict(float)
        self._totals: dict[str, float] = defaultdict(float)
        self._steps = 0

    def update(self, name: str, delta: float) -> None:
        self.current[name] += delta
        self._totals[name] += self._steps * delta

    def advance(self) -> None:
        self._steps += 1

    def average(self) -> dict[str, float]:
        if self._steps == 0:
            return {}
        return {
            name: w - self._totals[name] / self._steps
            for name, w in self.current.items()
        }


def _as_pos(pos: PosLike) -> str:
    return pos.pos if isinstance(pos, MorphTag) else str(pos).split("|", 1)[0]


class MostFrequentLemmatizer(BaseEstimator):
    """Most frequent training lemma per (form, POS); the form itself otherwise."""

    def fit(
        self, X: Sequence[tuple[str, PosLike]], y: Sequence[str]
    ) -> "MostFrequentLemmatizer":
        if len(X) != len(y):
            raise ValueError("X and y length mismatch")
        counts: dict[tuple[str, str], Counter] = defaultdict(Counter)
        for (form, pos), lemma in zip(X, y):
            counts[(form, _as_pos(pos))][lemma] += 1
        # ties break toward the lexicographically smaller lemma
        self.table_ = {
            key: min(c.items(), key=lambda kv: (-kv[1], kv[0]))[0]
            for key, c in counts.items()
        }
        return self

    def predict_one(self, form: str, pos: PosLike) -> str:
        self._check_fitted()
        return self.table_.get((form, _as_pos(pos)), form)

    def predict(self, X: Sequence[tuple[str, PosLike]]) -> list[str]:
        return [self.predict_one(form, pos) for form, pos in X]

    def knows(self, form: str, pos: PosLike) -> bool:
        self._check_fitted()
        return (form, _as_pos(pos)) in self.table_

    def _check_fitted(self) -> None:
        if not hasattr(self, "table_"):
            raise NotFittedError("MostFrequentLemmatizer is not fitted yet")


def align_pair(form: str, lemma: str) -> list[tuple[str, str]]:
    """Segment steps (input segment, output symbol) for one training pair.

    Reads the edit-tree alignment, maps identical segments to COPY and folds
    empty-input insertions into the neighboring segment so that every step
    consumes at least one character.
    """
    tree = extract_tree(form, lemma)
    pairs = alignment(tree, form, lemma)
    merged: list[tuple[str, str]] = []
    pending = ""
    for seg_in, seg_out in pairs:
        if seg_in == "":
            # insertion: attach to the previous step, or hold for the next
            if merged:
                prev_in, prev_out = merged[-1]
                merged[-1] = (prev_in, _output_of(prev_in, prev_out) + seg_out)
            else:
                pending += seg_out
            continue
        if pending:
            merged.append((seg_in, pending + seg_out))
            pending = ""
        else:
            merged.append((seg_in, seg_out))
    if pending:
        if merged:
            prev_in, prev_out = merged[-1]
            merged[-1] = (prev_in, _output_of(prev_in, prev_out) + pending)
        else:
            return []  # empty form; nothing to transduce
    steps = []
    for seg_in, seg_out in merged:
        if seg_in == seg_out:
            steps.append((seg_in, COPY))
        else:
            steps.append((seg_in, seg_out))
    return steps


def _output_of(seg_in: str, seg_out: str) -> str:
    return seg_in if seg_out == COPY else seg_out


class TransducerLemmatizer(BaseEstimator):
    """Segmental character transducer trained with an averaged perceptron.

    Parameters
    ----------
    iterations : perceptron passes over the training types.
    context_window : total character-context window (split evenly per side).
    min_symbol_pairs : output symbols used by fewer distinct form-lemma
        pairs are pruned from the alphabet; COPY is always kept.
    backoff_seen : answer seen (form, POS) pairs from the frequency table
        and transduce only unknown ones.
    seed : type shuffling seed.
    """

    def __init__(
        self,
        iterations: int = 10,
        context_window: int = 6,
        min_symbol_pairs: int = 5,
        backoff_seen: bool = True,
        seed: int = 42,
    ):
        self.iterations = iterations
        self.context_window = context_window
        self.min_symbol_pairs = min_symbol_pairs
        self.backoff_seen = backoff_seen
        self.seed = seed

    # ------------------------------------------------------------------
    # training
    # ------------------------------------------------------------------

    def fit(
        self, X: Sequence[tuple[str, PosLike]], y: Sequence[str]
    ) -> "TransducerLemmatizer":
        if len(X) != len(y):
            raise ValueError("X and y length mismatch")
        self.simple_ = MostFrequentLemmatizer().fit(X, y)

        types = sorted({(form, _as_pos(pos), lemma) for (form, pos), lemma in zip(X, y)})
        aligned: dict[tuple[str, str, str], list[tuple[str, str]]] = {}
        symbol_support: dict[str, set[tuple[str, str]]] = defaultdict(set)
        for form, pos, lemma in types:
            if not form:
                continue
            steps = align_pair(form, lemma)
            aligned[(form, pos, lemma)] = steps
            for _, sym in steps:
                symbol_support[sym].add((form, lemma))
        self.alphabet_ = {COPY} | {
            sym
            for sym, support in symbol_support.items()
            if len(support) >= self.min_symbol_pairs and sym != COPY
        }
        # decode options: observed (segment, symbol) step types with kept symbols
        options: dict[str, set[str]] = defaultdict(set)
        trainable: list[tuple[str, str, list[tuple[str, str]]]] = []
        dropped = 0
        for (form, pos, lemma), steps in sorted(aligned.items()):
            if all(sym in self.alphabet_ for _, sym in steps):
                trainable.append((form, pos, steps))
                for seg, sym in steps:
                    options[seg].add(sym)
            else:
                dropped += 1
        if dropped:
            logger.warning(
                "transducer: %d training pairs dropped (pruned output symbol)",
                dropped,
            )
        self.segment_options_ = {
            seg: tuple(sorted(syms)) for seg, syms in options.items()
        }
        self.max_segment_ = max((len(s) for s in self.segment_options_), default=1)

        weights = AveragedWeights()
        rng = random.Random(self.seed)
        for _ in range(self.iterations):
            rng.shuffle(trainable)
            for form, pos, gold_steps in trainable:
                predicted = self._decode(form, pos, weights.current)
                if predicted != gold_steps:
                    for name, value in self._path_features(form, pos, gold_steps).items():
                        weights.update(name, value)
                    for name, value in self._path_features(form, pos, predicted).items():
                        weights.update(name, -value)
                weights.advance()
        self.weights_ = weights.average()
        return self

    # ------------------------------------------------------------------
    # features & decoding
    # ------------------------------------------------------------------

    def _step_features(
        self, form: str, pos: str, start: int, seg: str, sym: str, prev_sym: str
    ) -> list[str]:
        half = self.context_window // 2
        end = start + len(seg)
        names = [
            "io\t" + seg + "\t" + sym,
            "pos\t" + pos + "\t" + sym,
            "tr\t" + prev_sym + "\t" + sym,
        ]
        left = "\x02" * max(0, half - start) + form[max(0, start - half): start]
        right = form[end: end + half]
        right += "\x03" * (half - len(right))
        for k in range(1, half + 1):
            names.append("cl\t" + left[len(left) - k:] + "\t" + sym)
            names.append("cr\t" + right[:k] + "\t" + sym)
        return names

    def _path_features(
        self, form: str, pos: str, steps: Sequence[tuple[str, str]]
    ) -> Counter:
        feats: Counter = Counter()
        start = 0
        prev = "\x02"
        for seg, sym in steps:
            for name in self._step_features(form, pos, start, seg, sym, prev):
                feats[name] += 1
            start += len(seg)
            prev = sym
        return feats

    def _decode(
        self, form: str, pos: str, weights: dict[str, float]
    ) -> list[tuple[str, str]]:
        """Best-scoring monotone segmentation; ties prefer COPY, then the
        lexicographically smaller symbol, then shorter segments."""
        n = len(form)
        # chart[i][prev_sym] = (score, back reference)
        chart: list[dict[str, tuple[float, Optional[tuple]]]] = [
            {} for _ in range(n + 1)
        ]
        chart[0]["\x02"] = (0.0, None)
        for i in range(n):
            if not chart[i]:
                continue
            max_len = min(self.max_segment_, n - i)
            for prev_sym, (score, _) in chart[i].items():
                for seg_len in range(1, max_len + 1):
                    seg = form[i: i + seg_len]
                    symbols = set(self.segment_options_.get(seg, ()))
                    if seg_len == 1:
                        symbols.add(COPY)
                    for sym in symbols:
                        gain = sum(
                            weights.get(name, 0.0)
                            for name in self._step_features(form, pos, i, seg, sym, prev_sym)
                        )
                        candidate = (score + gain, (i, prev_sym, seg, sym))
                        slot = chart[i + seg_len].get(sym)
                        if slot is None or self._better(candidate, slot):
                            chart[i + seg_len][sym] = candidate
        if not chart[n]:
            return [(c, COPY) for c in form]
        best_sym = None
        best = None
        for sym, entry in chart[n].items():
            cand = (entry, sym)
            if best is None or self._better_final(cand, best):
                best = cand
                best_sym = sym
        steps: list[tuple[str, str]] = []
        cursor = chart[n][best_sym]
        while cursor[1] is not None:
            i, prev_sym, seg, sym = cursor[1]
            steps.append((seg, sym))
            cursor = chart[i][prev_sym]
        steps.reverse()
        return steps

    @staticmethod
    def _tie_key(seg: str, sym: str) -> tuple:
        return (0 if sym == COPY else 1, sym, len(seg))

    def _better(self, candidate, incumbent) -> bool:
        (score_c, back_c), (score_i, back_i) = candidate, incumbent
        if score_c != score_i:
            return score_c > score_i
        if back_i is None:
            return False
        _, _, seg_c, sym_c = back_c
        _, _, seg_i, sym_i = back_i
        return self._tie_key(seg_c, sym_c) < self._tie_key(seg_i, sym_i)

    def _better_final(self, candidate, incumbent) -> bool:
        (entry_c, sym_c), (entry_i, sym_i) = candidate, incumbent
        if entry_c[0] != entry_i[0]:
            return entry_c[0] > entry_i[0]
        return (0 if sym_c == COPY else 1, sym_c) < (0 if sym_i == COPY else 1, sym_i)

    # ------------------------------------------------------------------
    # prediction
    # ------------------------------------------------------------------

    def transduce(self, form: str, pos: PosLike) -> str:
        """Raw transducer output, ignoring the seen-pair backoff."""
        self._check_fitted()
        steps = self._decode(form, _as_pos(pos), self.weights_)
        return "".join(_output_of(seg, sym) for seg, sym in steps)

    def predict_one(self, form: str, pos: PosLike) -> str:
        self._check_fitted()
        if self.backoff_seen and self.simple_.knows(form, pos):
            return self.simple_.predict_one(form, pos)
        return self.transduce(form, pos)

    def predict(self, X: Sequence[tuple[str, PosLike]]) -> list[str]:
        return [self.predict_one(form, pos) for form, pos in X]

    def _check_fitted(self) -> None:
        if not hasattr(self, "weights_"):
            raise NotFittedError("TransducerLemmatizer is not fitted yet")
