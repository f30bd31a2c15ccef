"""Conditional log-linear lemmatization over edit-tree candidate sets.

For a form w with morphological tag m, the probability of candidate lemma l
is proportional to exp(f(l, w, m) . theta) over the candidate set of w.
Training maximizes L2-regularized conditional log-likelihood with batch
L-BFGS; instances are deduplicated to (form, tag, lemma) types with token
counts as weights, which leaves the objective unchanged.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse
from scipy.optimize import minimize
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .candidates import (
    CandidateSet,
    SeenLemmaTable,
    TreeInventory,
    build_inventory,
    generate_candidates,
)
from .features import (
    FeatureConfig,
    FeatureDictionary,
    FeatureVector,
    Lexicon,
    MorphTag,
    lemma_feature_counts,
)

__all__ = ["TreeLemmatizer", "LemmaTrainingData", "nll_and_gradient"]

logger = logging.getLogger(__name__)

TagLike = Union[MorphTag, str]


def _as_tag(tag: TagLike) -> MorphTag:
    return tag if isinstance(tag, MorphTag) else MorphTag.parse(tag)


@dataclass
class LemmaTrainingData:
    """Grouped softmax problem: one row per candidate, one group per instance."""

    matrix: scipy.sparse.csr_matrix
    row_starts: np.ndarray      # first row of each instance
    row_counts: np.ndarray      # candidates per instance
    gold_rows: np.ndarray       # row index of the gold candidate
    weights: np.ndarray         # token count per instance

    @property
    def n_instances(self) -> int:
        return len(self.row_starts)

    @property
    def n_tokens(self) -> float:
        return float(self.weights.sum())


def nll_and_gradient(
    theta: np.ndarray, data: LemmaTrainingData, l2: float = 0.0
) -> tuple[float, np.ndarray]:
    """Negative log-likelihood and its gradient at ``theta``.

    NLL = -sum_i w_i log p(gold_i) + (l2/2) ||theta||^2 and the gradient is
    sum_i w_i (E_p[f] - f(gold_i)) + l2 theta.  Raises on non-finite values,
    which diagnoses exploding weights.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        scores = data.matrix @ theta
        maxima = np.maximum.reduceat(scores, data.row_starts)
        expanded_max = np.repeat(maxima, data.row_counts)
        exp_scores = np.exp(scores - expanded_max)
        normalizers = np.add.reduceat(exp_scores, data.row_starts)
        log_z = maxima + np.log(normalizers)
        probs = exp_scores / np.repeat(normalizers, data.row_counts)

        nll = float(data.weights @ (log_z - scores[data.gold_rows]))
        nll += 0.5 * l2 * float(theta @ theta)

        coef = probs * np.repeat(data.weights, data.row_counts)
        coef[data.gold_rows] -= data.weights
        grad = data.matrix.T @ coef + l2 * theta
    if not np.isfinite(nll) or not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite loss or gradient; weights exploded")
    return nll, grad


class TreeLemmatizer(BaseEstimator):
    """Trainable lemmatizer: score edit-tree candidates with a log-linear model.

    Parameters
    ----------
    min_pair_count : prune trees extracted from fewer distinct training pairs.
    l2 : L2 regularization strength; None means 1 / number of training tokens.
    max_iter, tol, history_size : L-BFGS budget, relative-NLL stopping
        tolerance and history length.
    max_affix_len, max_context_len, use_align, use_lemma, use_dict,
    conjoin_attrs : feature templates, see :mod:`lemtag.features`.
    lexicons : external word lists for dictionary features.
    """

    def __init__(
        self,
        min_pair_count: int = 2,
        l2: Optional[float] = None,
        max_iter: int = 200,
        tol: float = 1e-6,
        history_size: int = 10,
        max_affix_len: int = 10,
        max_context_len: int = 6,
        use_align: bool = True,
        use_lemma: bool = True,
        use_dict: bool = True,
        conjoin_attrs: bool = True,
        lexicons: Optional[Sequence[Lexicon]] = None,
    ):
        self.min_pair_count = min_pair_count
        self.l2 = l2
        self.max_iter = max_iter
        self.tol = tol
        self.history_size = history_size
        self.max_affix_len = max_affix_len
        self.max_context_len = max_context_len
        self.use_align = use_align
        self.use_lemma = use_lemma
        self.use_dict = use_dict
        self.conjoin_attrs = conjoin_attrs
        self.lexicons = lexicons

    def _feature_config(self) -> FeatureConfig:
        return FeatureConfig(
            max_affix_len=self.max_affix_len,
            max_context_len=self.max_context_len,
            use_align=self.use_align,
            use_lemma=self.use_lemma,
            use_dict=self.use_dict,
            conjoin_attrs=self.conjoin_attrs,
        )

    # ------------------------------------------------------------------
    # training
    # ------------------------------------------------------------------

    def fit(self, X: Sequence[tuple[str, TagLike]], y: Sequence[str]) -> "TreeLemmatizer":
        """Fit on token instances X = [(form, tag), ...] with gold lemmata y."""
        if len(X) != len(y):
            raise ValueError(f"X and y length mismatch: {len(X)} vs {len(y)}")
        if not X:
            raise ValueError("cannot fit on an empty training set")
        forms = [form for form, _ in X]
        self.inventory_, self.seen_ = build_inventory(
            list(zip(forms, y)), self.min_pair_count
        )
        self.dictionary_ = FeatureDictionary()
        data = self.build_training_data(X, y)
        if data.n_instances == 0:
            raise ValueError("no trainable instances: all gold lemmata unreachable")
        self.dictionary_.freeze()
        l2 = self.l2 if self.l2 is not None else 1.0 / data.n_tokens
        theta = np.zeros(len(self.dictionary_))
        self.initial_nll_ = nll_and_gradient(theta, data, l2)[0]
        if self.max_iter > 0:
            result = minimize(
                nll_and_gradient,
                theta,
                args=(data, l2),
                jac=True,
                method="L-BFGS-B",
                options={
                    "maxiter": self.max_iter,
                    "maxcor": self.history_size,
                    "ftol": self.tol,
                    "gtol": 1e-6,
                },
            )
            theta = result.x
            self.n_iter_ = int(result.nit)
            self.final_nll_ = float(result.fun)
        else:
            self.n_iter_ = 0
            self.final_nll_ = self.initial_nll_
        self.theta_ = theta
        self.l2_ = l2
        self._candidate_cache: dict[str, CandidateSet] = {}
        return self

    def build_training_data(
        self, X: Sequence[tuple[str, TagLike]], y: Sequence[str]
    ) -> LemmaTrainingData:
        """Vectorize (form, tag, gold) tokens against the fitted inventory.

        Deduplicates tokens into weighted types.  Instances whose gold lemma
        is outside the candidate set are dropped with a warning; with the
        seen-lemma table built from the same data this never triggers.
        """
        type_counts: Counter[tuple[str, str, str]] = Counter()
        for (form, tag), lemma in zip(X, y):
            type_counts[(form, _as_tag(tag).render(), lemma)] += 1

        indptr = [0]
        col_indices: list[np.ndarray] = []
        values: list[np.ndarray] = []
        row_starts: list[int] = []
        row_counts: list[int] = []
        gold_rows: list[int] = []
        weights: list[float] = []
        feature_cache: dict[tuple[str, str], list[FeatureVector]] = {}
        n_rows = 0
        skipped = 0
        for form, tag_repr, gold in sorted(type_counts):
            count = type_counts[(form, tag_repr, gold)]
            cand = self._candidates(form)
            gold_idx = _find_gold(cand, gold)
            if gold_idx is None:
                skipped += count
                logger.warning(
                    "gold lemma %r not reachable for form %r; instance skipped",
                    gold, form,
                )
                continue
            vectors = feature_cache.get((form, tag_repr))
            if vectors is None:
                vectors = self._candidate_vectors(form, MorphTag.parse(tag_repr), cand)
                feature_cache[(form, tag_repr)] = vectors
            row_starts.append(n_rows)
            row_counts.append(len(vectors))
            gold_rows.append(n_rows + gold_idx)
            weights.append(count)
            for vec in vectors:
                col_indices.append(vec.indices)
                values.append(vec.counts)
                indptr.append(indptr[-1] + len(vec))
            n_rows += len(vectors)
        if skipped:
            logger.warning("skipped %d training tokens with unreachable gold", skipped)
        matrix = scipy.sparse.csr_matrix(
            (
                np.concatenate(values) if values else np.empty(0),
                np.concatenate(col_indices) if col_indices else np.empty(0, dtype=np.int64),
                np.asarray(indptr, dtype=np.int64),
            ),
            shape=(n_rows, max(len(self.dictionary_), 1)),
        )
        return LemmaTrainingData(
            matrix=matrix,
            row_starts=np.asarray(row_starts, dtype=np.int64),
            row_counts=np.asarray(row_counts, dtype=np.int64),
            gold_rows=np.asarray(gold_rows, dtype=np.int64),
            weights=np.asarray(weights, dtype=np.float64),
        )

    # ------------------------------------------------------------------
    # inference
    # ------------------------------------------------------------------

    def candidate_probabilities(
        self, form: str, tag: TagLike
    ) -> list[tuple[str, float]]:
        """Candidate lemmata with probabilities, highest first, ties by lemma."""
        self._check_fitted()
        tag = _as_tag(tag)
        cand = self._candidates(form)
        if len(cand) == 0:
            raise ValueError(f"no lemma candidates for form {form!r}")
        vectors = self._candidate_vectors(form, tag, cand)
        scores = np.array([vec.dot(self.theta_) for vec in vectors])
        scores -= scores.max()
        probs = np.exp(scores)
        probs /= probs.sum()
        ranked = sorted(
            zip(cand.lemmata(), probs.tolist()), key=lambda lp: (-lp[1], lp[0])
        )
        return ranked

    def predict_one(self, form: str, tag: TagLike) -> str:
        return self.candidate_probabilities(form, tag)[0][0]

    def predict(self, X: Sequence[tuple[str, TagLike]]) -> list[str]:
        """Most probable lemma per (form, tag) token."""
        return [self.predict_one(form, tag) for form, tag in X]

    # ------------------------------------------------------------------
    # internals
    # ------------------------------------------------------------------

    def _check_fitted(self) -> None:
        if not hasattr(self, "theta_"):
            raise NotFittedError("TreeLemmatizer is not fitted yet")

    def _candidates(self, form: str) -> CandidateSet:
        cache = getattr(self, "_candidate_cache", None)
        if cache is None:
            cache = self._candidate_cache = {}
        cand = cache.get(form)
        if cand is None:
            cand = generate_candidates(form, self.inventory_, self.seen_)
            cache[form] = cand
        return cand

    def _candidate_vectors(
        self, form: str, tag: MorphTag, cand: CandidateSet
    ) -> list[FeatureVector]:
        cfg = self._feature_config()
        lexicons = tuple(self.lexicons or ())
        vectors = []
        for entry in cand.entries:
            tree_id = entry.trees[0] if entry.trees else None
            tree = self.inventory_.trees[tree_id] if tree_id is not None else None
            counts = lemma_feature_counts(
                form, entry.lemma, tree, tree_id, tag,
                lexicons=lexicons, cfg=cfg, seen=entry.seen,
            )
            vectors.append(self.dictionary_.vectorize(counts))
        return vectors


def _find_gold(cand: CandidateSet, gold: str) -> Optional[int]:
    lemmata = cand.lemmata()
    try:
        return lemmata.index(gold)
    except ValueError:
        lowered = gold.lower()
        for i, lemma in enumerate(lemmata):
            if lemma.lower() == lowered:
                return i
    return None
