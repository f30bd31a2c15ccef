"""Globally normalized joint model over tag sequences and per-token lemmata.

Each sentence becomes a tree-shaped factor graph: a (possibly pair-state
expanded) tag chain over the pruned lattice, with one lemma variable per
token attached to its tag node through a factor scoring candidate lemmata
under each surviving tag.  Two-pass belief propagation in log space is exact
on this tree, for both marginals and MAP.

Training is per-sentence SGD on the global log-likelihood: observed clique
features minus their expectations under the BP marginals, for both the tag
weight block and the lemma weight block.  The tag block is initialized from
a pretrained tagger; the lemma block starts at zero unless a pretrained
pipeline lemmatizer is supplied.
"""

from __future__ import annotations

import copy
import logging
import random
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .candidates import CandidateSet, build_inventory, generate_candidates
from .features import FeatureConfig, FeatureDictionary, Lexicon, MorphTag, lemma_feature_counts
from .lemmatizer import TreeLemmatizer
from .tagger import CrfTagger, _SentenceCache, chain_forward_backward, chain_viterbi

__all__ = ["FactorGraph", "BpResult", "JointTaggerLemmatizer", "build_factor_graph", "bp_infer"]

logger = logging.getLogger(__name__)

TagLike = Union[MorphTag, str]


@dataclass
class FactorGraph:
    """Numeric factor tables for one sentence; self-contained for inference.

    ``lemma_pot[i]`` is the (candidates x surviving tags) log-potential table
    of token i; candidate support is enforced by construction (only
    candidates appear).  ``emissions[i]`` aligns with ``tag_domains[i]``.
    """

    forms: list[str]
    tag_names: list[str]
    boundary: int
    order: int
    tag_domains: list[np.ndarray]
    emissions: list[np.ndarray]
    t1: np.ndarray
    t2: dict[tuple[int, int, int], float]
    lemma_domains: list[tuple[str, ...]]
    lemma_pot: list[np.ndarray]

    def assignment_score(self, tags: Sequence[int], lemmata: Sequence[int]) -> float:
        """Log score of a joint assignment (tag and lemma indices per token)."""
        b = self.boundary
        total = 0.0
        for i, (t, l) in enumerate(zip(tags, lemmata)):
            dom = self.tag_domains[i]
            pos = int(np.searchsorted(dom, t))
            total += float(self.emissions[i][pos])
            prev = tags[i - 1] if i > 0 else b
            total += float(self.t1[prev, t])
            if self.order == 2:
                prev2 = tags[i - 2] if i > 1 else b
                total += self.t2.get((prev2, prev, t), 0.0)
            total += float(self.lemma_pot[i][l, pos])
        return total


@dataclass
class BpResult:
    """Exact marginals and MAP assignment from two-pass message passing."""

    log_partition: float
    tag_marginals: list[dict[str, float]]
    lemma_marginals: list[dict[str, float]]
    joint_marginals: list[np.ndarray]   # (candidates x tags) per token
    map_tags: list[str]
    map_lemmata: list[str]


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    m = a.max(axis=0)
    return m + np.log(np.exp(a - m[None, :]).sum(axis=0))


def _graph_chain(graph: FactorGraph, leaf: list[np.ndarray]):
    """Chain potentials with lemma-leaf messages folded into the nodes."""
    b = graph.boundary
    length = len(graph.forms)
    if graph.order == 1:
        node = []
        edge: list[Optional[np.ndarray]] = [None]
        for i in range(length):
            dom = graph.tag_domains[i]
            pot = graph.emissions[i] + leaf[i]
            if i == 0:
                pot = pot + graph.t1[b, dom]
            else:
                edge.append(graph.t1[np.ix_(graph.tag_domains[i - 1], dom)])
            node.append(pot)
        states = [[(b, int(c)) for c in graph.tag_domains[0]]] + [
            [(int(a), int(c))
             for a in graph.tag_domains[i - 1] for c in graph.tag_domains[i]]
            for i in range(1, length)
        ]
        return None, node, edge
    states = [[(b, int(c)) for c in graph.tag_domains[0]]]
    for i in range(1, length):
        states.append(
            [(int(a), int(c))
             for a in graph.tag_domains[i - 1] for c in graph.tag_domains[i]]
        )
    node = []
    for i, state_list in enumerate(states):
        dom = graph.tag_domains[i]
        pot = np.empty(len(state_list))
        for si, (a, c) in enumerate(state_list):
            pos = int(np.searchsorted(dom, c))
            pot[si] = graph.emissions[i][pos] + graph.t1[a, c] + leaf[i][pos]
            if i == 0:
                pot[si] += graph.t2.get((b, b, c), 0.0)
        node.append(pot)
    edge = [None]
    for i in range(1, length):
        mat = np.full((len(states[i - 1]), len(states[i])), -np.inf)
        for pi, (a, bb) in enumerate(states[i - 1]):
            for ci, (bb2, c) in enumerate(states[i]):
                if bb2 == bb:
                    mat[pi, ci] = graph.t2.get((a if i > 1 else b, bb, c), 0.0)
        edge.append(mat)
    return states, node, edge


def bp_infer(graph: FactorGraph) -> BpResult:
    """Leaves-to-root-to-leaves message passing; exact on the tree graph.

    MAP ties resolve to the lexicographically smallest (tag rendering,
    lemma) assignment because domains are kept in sorted order.
    """
    for i, pot in enumerate(graph.lemma_pot):
        if not np.all(np.isfinite(pot)):
            raise FloatingPointError(f"non-finite lemma potentials at token {i}")
    leaf_sum = [_logsumexp_rows(pot) for pot in graph.lemma_pot]
    states, node, edge = _graph_chain(graph, leaf_sum)
    log_z, unary, _ = chain_forward_backward(node, edge)

    tag_marginals: list[dict[str, float]] = []
    lemma_marginals: list[dict[str, float]] = []
    joint_marginals: list[np.ndarray] = []
    for i in range(len(graph.forms)):
        dom = graph.tag_domains[i]
        probs = np.exp(unary[i])
        if graph.order == 1 or states is None:
            tag_probs = probs
        else:
            tag_probs = np.zeros(len(dom))
            for (a, c), p in zip(states[i], probs):
                tag_probs[int(np.searchsorted(dom, c))] += p
        cond = np.exp(graph.lemma_pot[i] - leaf_sum[i][None, :])
        joint = cond * tag_probs[None, :]
        joint_marginals.append(joint)
        tag_marginals.append({
            graph.tag_names[int(t)]: float(p) for t, p in zip(dom, tag_probs)
        })
        lemma_probs = joint.sum(axis=1)
        lemma_marginals.append({
            lemma: float(p)
            for lemma, p in zip(graph.lemma_domains[i], lemma_probs)
        })

    leaf_max = [pot.max(axis=0) for pot in graph.lemma_pot]
    states_m, node_m, edge_m = _graph_chain(graph, leaf_max)
    _, path = chain_viterbi(node_m, edge_m)
    map_tags: list[str] = []
    map_lemmata: list[str] = []
    for i, p in enumerate(path):
        dom = graph.tag_domains[i]
        if graph.order == 1:
            tag = int(dom[p])
        else:
            tag = states_m[i][p][1]
        pos = int(np.searchsorted(dom, tag))
        best = int(np.argmax(graph.lemma_pot[i][:, pos]))
        map_tags.append(graph.tag_names[tag])
        map_lemmata.append(graph.lemma_domains[i][best])
    return BpResult(
        log_partition=log_z,
        tag_marginals=tag_marginals,
        lemma_marginals=lemma_marginals,
        joint_marginals=joint_marginals,
        map_tags=map_tags,
        map_lemmata=map_lemmata,
    )


@dataclass
class _JointSentence:
    forms: list[str]
    cache: _SentenceCache                  # tagger rows/domains/gold
    matrix: Optional[scipy.sparse.csr_matrix]  # stacked lemma-feature rows
    token_offsets: list[int]               # first row per token
    shapes: list[tuple[int, int]]          # (candidates, tags) per token
    lemma_domains: list[tuple[str, ...]]
    gold_rows: np.ndarray                  # gold (lemma, tag) row per token
    row_parts: Optional[tuple[list, list, list]] = None  # until the dict is final

    def finalize(self, n_features: int) -> None:
        data_parts, col_parts, indptr = self.row_parts
        self.matrix = scipy.sparse.csr_matrix(
            (
                np.concatenate(data_parts) if data_parts else np.empty(0),
                np.concatenate(col_parts) if col_parts else np.empty(0, dtype=np.int64),
                np.asarray(indptr, dtype=np.int64),
            ),
            shape=(len(indptr) - 1, max(n_features, 1)),
        )
        self.row_parts = None


class JointTaggerLemmatizer(BaseEstimator):
    """Joint morphological tagging and lemmatization via a tree CRF.

    Parameters
    ----------
    pretrained_tagger : tag weights to start from; None trains one
        internally on the same data (recommended), unless ``pretrain`` is
        False in which case tag weights start at zero (ablation).
    pretrained_lemmatizer : optional pipeline lemmatizer; its inventory and
        any overlapping feature weights seed the lemma block, which
        otherwise starts at zero.
    epochs, eta0, seed : SGD schedule, step eta0 / (1 + t / sentences).
    tagger_params : constructor arguments for the internally trained tagger.
    min_pair_count, lexicons and the feature flags mirror TreeLemmatizer and
    apply when no pretrained lemmatizer is given.
    """

    def __init__(
        self,
        pretrained_tagger: Optional[CrfTagger] = None,
        pretrained_lemmatizer: Optional[TreeLemmatizer] = None,
        pretrain: bool = True,
        epochs: int = 10,
        eta0: float = 0.1,
        seed: int = 42,
        tagger_params: Optional[dict] = None,
        min_pair_count: int = 2,
        max_affix_len: int = 10,
        max_context_len: int = 6,
        use_align: bool = True,
        use_lemma: bool = True,
        use_dict: bool = True,
        conjoin_attrs: bool = True,
        lexicons: Optional[Sequence[Lexicon]] = None,
    ):
        self.pretrained_tagger = pretrained_tagger
        self.pretrained_lemmatizer = pretrained_lemmatizer
        self.pretrain = pretrain
        self.epochs = epochs
        self.eta0 = eta0
        self.seed = seed
        self.tagger_params = tagger_params
        self.min_pair_count = min_pair_count
        self.max_affix_len = max_affix_len
        self.max_context_len = max_context_len
        self.use_align = use_align
        self.use_lemma = use_lemma
        self.use_dict = use_dict
        self.conjoin_attrs = conjoin_attrs
        self.lexicons = lexicons

    # ------------------------------------------------------------------
    # training
    # ------------------------------------------------------------------

    def fit(
        self,
        X: Sequence[Sequence[str]],
        y: Sequence[Sequence[tuple[TagLike, str]]],
    ) -> "JointTaggerLemmatizer":
        """Fit on sentences X with per-token (tag, lemma) annotations y."""
        if len(X) != len(y):
            raise ValueError("X and y length mismatch")
        sentences = [list(forms) for forms in X]
        tag_seqs = [[_as_tag(t) for t, _ in sent] for sent in y]
        lemma_seqs = [[l for _, l in sent] for sent in y]

        self.tagger_ = self._init_tagger(sentences, tag_seqs)
        self._init_lemma_side(sentences, lemma_seqs)

        prepared, skipped = self._prepare_sentences(sentences, tag_seqs, lemma_seqs)
        if skipped:
            logger.warning(
                "joint training: %d sentences skipped (gold outside factor support)",
                skipped,
            )
        self.dictionary_.freeze()
        for sent in prepared:
            sent.finalize(len(self.dictionary_))
        self.theta_ = np.zeros(len(self.dictionary_))
        if self.pretrained_lemmatizer is not None:
            self._copy_pipeline_weights()
        self.n_train_sentences_ = len(prepared)

        rng = random.Random(self.seed)
        steps_per_epoch = max(1, len(prepared))
        t = 0
        for _ in range(self.epochs):
            rng.shuffle(prepared)
            for sent in prepared:
                eta = self.eta0 / (1.0 + t / steps_per_epoch)
                t += 1
                self._sgd_step(sent, eta)
        return self

    def _init_tagger(self, sentences, tag_seqs) -> CrfTagger:
        if self.pretrained_tagger is not None:
            return copy.deepcopy(self.pretrained_tagger)
        params = dict(self.tagger_params or {})
        params.setdefault("seed", self.seed)
        if not self.pretrain:
            params["epochs"] = 0
        tagger = CrfTagger(**params)
        tagger.fit(sentences, tag_seqs)
        return tagger

    def _init_lemma_side(self, sentences, lemma_seqs) -> None:
        if self.pretrained_lemmatizer is not None:
            pipe = self.pretrained_lemmatizer
            self.inventory_ = pipe.inventory_
            self.seen_ = pipe.seen_
            self.feature_config_ = pipe._feature_config()
            self.lexicons_ = tuple(pipe.lexicons or ())
        else:
            pairs = [
                (form, lemma)
                for forms, lemmata in zip(sentences, lemma_seqs)
                for form, lemma in zip(forms, lemmata)
            ]
            self.inventory_, self.seen_ = build_inventory(pairs, self.min_pair_count)
            self.feature_config_ = FeatureConfig(
                max_affix_len=self.max_affix_len,
                max_context_len=self.max_context_len,
                use_align=self.use_align,
                use_lemma=self.use_lemma,
                use_dict=self.use_dict,
                conjoin_attrs=self.conjoin_attrs,
            )
            self.lexicons_ = tuple(self.lexicons or ())
        self.dictionary_ = FeatureDictionary()
        self._candidate_cache: dict[str, CandidateSet] = {}
        self._vector_cache: dict[tuple[str, str], list] = {}

    def _copy_pipeline_weights(self) -> None:
        pipe = self.pretrained_lemmatizer
        copied = 0
        for name in self.dictionary_.names():
            src = pipe.dictionary_.intern(name) if pipe.dictionary_.frozen else None
            if src is not None:
                dst = self.dictionary_.intern(name)
                self.theta_[dst] = pipe.theta_[src]
                copied += 1
        logger.info("seeded %d lemma feature weights from the pipeline model", copied)

    def _candidates(self, form: str) -> CandidateSet:
        cand = self._candidate_cache.get(form)
        if cand is None:
            cand = generate_candidates(form, self.inventory_, self.seen_)
            self._candidate_cache[form] = cand
        return cand

    def _combo_vectors(self, form: str, tag: MorphTag):
        """Feature vectors for every (candidate, tag) combination of a token."""
        key = (form, tag.render())
        vectors = self._vector_cache.get(key)
        if vectors is not None:
            return vectors
        cand = self._candidates(form)
        vectors = []
        for entry in cand.entries:
            tree_id = entry.trees[0] if entry.trees else None
            tree = self.inventory_.trees[tree_id] if tree_id is not None else None
            counts = lemma_feature_counts(
                form, entry.lemma, tree, tree_id, tag,
                lexicons=self.lexicons_, cfg=self.feature_config_, seen=entry.seen,
            )
            vectors.append(self.dictionary_.vectorize(counts))
        self._vector_cache[key] = vectors
        return vectors

    def _prepare_sentences(self, sentences, tag_seqs, lemma_seqs):
        prepared: list[_JointSentence] = []
        skipped = 0
        for forms, tags, lemmata in zip(sentences, tag_seqs, lemma_seqs):
            if not forms:
                continue
            sent = self._prepare_one(forms, tags, lemmata)
            if sent is None:
                skipped += 1
            else:
                prepared.append(sent)
        return prepared, skipped

    def _prepare_one(self, forms, tags, lemmata) -> Optional[_JointSentence]:
        tagger = self.tagger_
        rows = tagger._local_rows(forms)
        domains = tagger.build_domains(forms)
        gold_tags = []
        for tag in tags:
            idx = tagger.tag_index_.get(tag.render())
            if idx is None:
                return None
            gold_tags.append(idx)
        for idx, dom in zip(gold_tags, domains):
            if idx not in dom:
                return None

        indptr = [0]
        data_parts: list[np.ndarray] = []
        col_parts: list[np.ndarray] = []
        token_offsets: list[int] = []
        shapes: list[tuple[int, int]] = []
        lemma_domains: list[tuple[str, ...]] = []
        gold_rows: list[int] = []
        n_rows = 0
        for i, form in enumerate(forms):
            cand = self._candidates(form)
            if len(cand) == 0:
                raise ValueError(f"no lemma candidates for token {i} ({form!r})")
            gold_lemma_idx = _find_lemma(cand.lemmata(), lemmata[i])
            if gold_lemma_idx is None:
                return None
            dom = domains[i]
            token_offsets.append(n_rows)
            shapes.append((len(cand), len(dom)))
            lemma_domains.append(cand.lemmata())
            gold_pos = int(np.searchsorted(dom, gold_tags[i]))
            gold_rows.append(n_rows + gold_lemma_idx * len(dom) + gold_pos)
            # rows are laid out lemma-major: for each candidate, one row per tag
            per_tag = [self._combo_vectors(form, tagger.tag_objs_[int(t)]) for t in dom]
            for li in range(len(cand)):
                for ti in range(len(dom)):
                    vec = per_tag[ti][li]
                    col_parts.append(vec.indices)
                    data_parts.append(vec.counts)
                    indptr.append(indptr[-1] + len(vec))
                    n_rows += 1
        cache = _SentenceCache(
            rows=rows,
            gold=np.asarray(gold_tags, dtype=np.int64),
            domains=domains,
            domains2=domains,
        )
        sent = _JointSentence(
            forms=list(forms),
            cache=cache,
            matrix=None,
            token_offsets=token_offsets,
            shapes=shapes,
            lemma_domains=lemma_domains,
            gold_rows=np.asarray(gold_rows, dtype=np.int64),
            row_parts=(data_parts, col_parts, indptr),
        )
        if self.dictionary_.frozen:
            sent.finalize(len(self.dictionary_))
        return sent

    def _lemma_potentials(self, sent: _JointSentence) -> list[np.ndarray]:
        flat = sent.matrix @ self.theta_
        pots = []
        for offset, (n_cand, n_tags) in zip(sent.token_offsets, sent.shapes):
            pots.append(flat[offset: offset + n_cand * n_tags].reshape(n_cand, n_tags))
        return pots

    def _sgd_step(self, sent: _JointSentence, eta: float) -> None:
        tagger = self.tagger_
        pots = self._lemma_potentials(sent)
        leaf = [_logsumexp_rows(p) for p in pots]
        if tagger.order == 1:
            unary, _ = tagger._update_order1(sent.cache, eta, extra=leaf)
            tag_probs = [np.exp(u) for u in unary]
        else:
            states, unary, _ = tagger._update_order2(sent.cache, eta, extra=leaf)
            tag_probs = []
            for i, dom in enumerate(sent.cache.domains2):
                probs = np.zeros(len(dom))
                for (a, c), p in zip(states[i], np.exp(unary[i])):
                    probs[int(np.searchsorted(dom, c))] += p
                tag_probs.append(probs)
        coef = np.empty(sent.matrix.shape[0])
        for i, (offset, (n_cand, n_tags)) in enumerate(
            zip(sent.token_offsets, sent.shapes)
        ):
            cond = np.exp(pots[i] - leaf[i][None, :])
            joint = cond * tag_probs[i][None, :]
            coef[offset: offset + n_cand * n_tags] = -joint.reshape(-1)
        coef[sent.gold_rows] += 1.0
        self.theta_ += eta * (sent.matrix.T @ coef)

    # ------------------------------------------------------------------
    # inference
    # ------------------------------------------------------------------

    def factor_graph(self, forms: Sequence[str]) -> FactorGraph:
        """Instantiate the factor graph of one sentence under current weights."""
        self._check_fitted()
        if not forms:
            raise ValueError("cannot build a factor graph for an empty sentence")
        tagger = self.tagger_
        rows = tagger._local_rows(forms)
        domains = tagger.build_domains(forms)
        emissions = []
        lemma_domains = []
        lemma_pot = []
        for i, form in enumerate(forms):
            dom = domains[i]
            if len(dom) == 0:
                raise ValueError(f"empty tag lattice at token {i} ({form!r})")
            cand = self._candidates(form)
            if len(cand) == 0:
                raise ValueError(f"no lemma candidates for token {i} ({form!r})")
            emissions.append(tagger._emission(rows[i])[dom])
            lemma_domains.append(cand.lemmata())
            pot = np.empty((len(cand), len(dom)))
            for ti, t in enumerate(dom):
                vectors = self._combo_vectors(form, tagger.tag_objs_[int(t)])
                for li, vec in enumerate(vectors):
                    pot[li, ti] = vec.dot(self.theta_)
            lemma_pot.append(pot)
        return FactorGraph(
            forms=list(forms),
            tag_names=tagger.tags_,
            boundary=tagger.boundary_,
            order=tagger.order,
            tag_domains=domains,
            emissions=emissions,
            t1=tagger.T1_,
            t2=tagger.T2_,
            lemma_domains=lemma_domains,
            lemma_pot=lemma_pot,
        )

    def decode(self, forms: Sequence[str]) -> list[tuple[MorphTag, str]]:
        """MAP tags and lemmata for one sentence."""
        if not forms:
            return []
        result = bp_infer(self.factor_graph(forms))
        return [
            (MorphTag.parse(tag), lemma)
            for tag, lemma in zip(result.map_tags, result.map_lemmata)
        ]

    def predict(self, X: Sequence[Sequence[str]]) -> list[list[tuple[MorphTag, str]]]:
        return [self.decode(forms) for forms in X]

    def _check_fitted(self) -> None:
        if not hasattr(self, "theta_"):
            raise NotFittedError("JointTaggerLemmatizer is not fitted yet")


def build_factor_graph(
    model: JointTaggerLemmatizer, forms: Sequence[str]
) -> FactorGraph:
    return model.factor_graph(forms)


def _as_tag(tag: TagLike) -> MorphTag:
    return tag if isinstance(tag, MorphTag) else MorphTag.parse(tag)


def _find_lemma(lemmata: Sequence[str], gold: str) -> Optional[int]:
    try:
        return list(lemmata).index(gold)
    except ValueError:
        lowered = gold.lower()
        for i, lemma in enumerate(lemmata):
            if lemma.lower() == lowered:
                return i
    return None
