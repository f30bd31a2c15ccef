"""Pruned higher-order linear-chain CRF over morphological tags.

Tags are full POS+attribute renderings treated as atomic labels.  Inference
runs on a pruned lattice: an order-0 (per-token) model proposes tags, tags
whose local marginal falls below ``threshold x best`` are dropped, and exact
dynamic programming runs over the survivors; with order 2 a second pruning
pass based on order-1 marginals precedes pair-state expansion.  With a zero
threshold and order 1 this is an exact first-order CRF.

Training is staged SGD with a decaying step size: order-0 first, then
order-1 on the pruned lattice, then optionally order-2.  Gold-path survival
under pruning is recorded as a diagnostic.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .features import FeatureDictionary, MorphTag

__all__ = [
    "CrfTagger",
    "word_shape",
    "tag_features",
    "chain_forward_backward",
    "chain_viterbi",
]

logger = logging.getLogger(__name__)

TagLike = Union[MorphTag, str]
BOUNDARY = "<s>"


def word_shape(word: str) -> str:
    """Collapse character classes: upper X, lower x, digit 9, hyphen -, other o.

    Runs of the same class collapse to a single symbol, so "Hello-9" maps to
    "Xx-9".
    """
    shape = []
    last = None
    for ch in word:
        if ch.isupper():
            cls = "X"
        elif ch.islower():
            cls = "x"
        elif ch.isdigit():
            cls = "9"
        elif ch == "-":
            cls = "-"
        else:
            cls = "o"
        if cls != last:
            shape.append(cls)
            last = cls
    return "".join(shape)


def tag_features(forms: Sequence[str], position: int, max_affix_len: int = 10) -> list[str]:
    """Local tagging features at ``position``: word, affixes, shape, context."""
    if not 0 <= position < len(forms):
        raise IndexError(f"position {position} out of range")
    word = forms[position]
    names = ["w\t" + word]
    for k in range(1, min(max_affix_len, len(word)) + 1):
        names.append("p\t" + word[:k])
        names.append("s\t" + word[-k:])
    names.append("sh\t" + word_shape(word))
    prev_word = forms[position - 1] if position > 0 else BOUNDARY
    next_word = forms[position + 1] if position + 1 < len(forms) else BOUNDARY
    names.append("pw\t" + prev_word)
    names.append("nw\t" + next_word)
    return names


# ----------------------------------------------------------------------
# generic chain inference (log space)
# ----------------------------------------------------------------------


def _logsumexp(a: np.ndarray, axis=None) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(a - m), axis=axis)) + np.squeeze(m, axis=axis)
    return out


def chain_forward_backward(
    node_pot: list[np.ndarray], edge_pot: list[Optional[np.ndarray]]
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Exact sum-product on a chain with given log potentials.

    ``node_pot[i]`` has one entry per state of position i; ``edge_pot[i]``
    (for i >= 1) is a (states[i-1], states[i]) matrix.  Returns the log
    partition, per-position log marginals and per-edge log marginals.
    """
    length = len(node_pot)
    alpha = [node_pot[0]]
    for i in range(1, length):
        alpha.append(node_pot[i] + _logsumexp(alpha[i - 1][:, None] + edge_pot[i], axis=0))
    log_z = float(_logsumexp(alpha[-1], axis=0))
    if not np.isfinite(log_z):
        raise FloatingPointError("non-finite log partition in chain inference")
    beta = [np.zeros_like(node_pot[i]) for i in range(length)]
    for i in range(length - 2, -1, -1):
        beta[i] = _logsumexp(
            edge_pot[i + 1] + (node_pot[i + 1] + beta[i + 1])[None, :], axis=1
        )
    unary = [alpha[i] + beta[i] - log_z for i in range(length)]
    edges = []
    for i in range(1, length):
        edges.append(
            alpha[i - 1][:, None]
            + edge_pot[i]
            + (node_pot[i] + beta[i])[None, :]
            - log_z
        )
    return log_z, unary, edges


def chain_viterbi(
    node_pot: list[np.ndarray], edge_pot: list[Optional[np.ndarray]]
) -> tuple[float, list[int]]:
    """Max-product on a chain; ties resolve to the smallest state indices."""
    length = len(node_pot)
    delta = [node_pot[0]]
    backptr: list[np.ndarray] = []
    for i in range(1, length):
        scores = delta[i - 1][:, None] + edge_pot[i]
        backptr.append(np.argmax(scores, axis=0))
        delta.append(node_pot[i] + np.max(scores, axis=0))
    best_last = int(np.argmax(delta[-1]))
    best_score = float(delta[-1][best_last])
    path = [best_last]
    for i in range(length - 2, -1, -1):
        path.append(int(backptr[i][path[-1]]))
    path.reverse()
    return best_score, path


# ----------------------------------------------------------------------
# the tagger
# ----------------------------------------------------------------------


@dataclass
class _SentenceCache:
    rows: list[np.ndarray]            # local feature indices per position
    gold: Optional[np.ndarray]        # gold tag indices (training only)
    domains: Optional[list[np.ndarray]] = None
    domains2: Optional[list[np.ndarray]] = None


class CrfTagger(BaseEstimator):
    """Morphological tagger: a pruned CRF of order 1 or 2.

    Parameters
    ----------
    order : chain order, 1 or 2.
    prune_threshold : relative marginal threshold per pruning level; a float
        applies to all levels, a pair sets (order-0, order-1) thresholds.  A
        threshold of 0 disables pruning at that level, 1.0 keeps only the
        locally best tags.
    epochs : SGD epochs per training stage.
    eta0 : initial SGD step size; step t uses eta0 / (1 + t / steps_per_epoch).
    max_affix_len : affix feature length cap.
    seed : shuffling seed.
    """

    def __init__(
        self,
        order: int = 2,
        prune_threshold: Union[float, tuple[float, float]] = 1e-4,
        epochs: int = 10,
        eta0: float = 0.1,
        max_affix_len: int = 10,
        seed: int = 42,
    ):
        self.order = order
        self.prune_threshold = prune_threshold
        self.epochs = epochs
        self.eta0 = eta0
        self.max_affix_len = max_affix_len
        self.seed = seed

    # ------------------------------------------------------------------
    # training
    # ------------------------------------------------------------------

    def fit(
        self, X: Sequence[Sequence[str]], y: Sequence[Sequence[TagLike]]
    ) -> "CrfTagger":
        """Fit on sentences X (lists of forms) with gold tag sequences y."""
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        if len(X) != len(y):
            raise ValueError("X and y length mismatch")
        sentences = [list(forms) for forms in X]
        gold_tags = [[_as_tag(t) for t in tags] for tags in y]
        for forms, tags in zip(sentences, gold_tags):
            if len(forms) != len(tags):
                raise ValueError("sentence and tag sequence lengths differ")
        all_tags = sorted({t.render() for tags in gold_tags for t in tags})
        if not all_tags:
            raise ValueError("empty tag set: no training tags found")
        self.tags_ = all_tags
        self.tag_objs_ = [MorphTag.parse(t) for t in all_tags]
        self.tag_index_ = {t: i for i, t in enumerate(all_tags)}
        k = len(all_tags)
        self.boundary_ = k

        self.feat_dict_ = FeatureDictionary()
        caches: list[_SentenceCache] = []
        for forms, tags in zip(sentences, gold_tags):
            rows = [
                np.asarray(
                    [self.feat_dict_.intern(n) for n in
                     tag_features(forms, i, self.max_affix_len)],
                    dtype=np.int64,
                )
                for i in range(len(forms))
            ]
            gold = np.asarray([self.tag_index_[t.render()] for t in tags], dtype=np.int64)
            caches.append(_SentenceCache(rows=rows, gold=gold))
        self.feat_dict_.freeze()

        self.W_ = np.zeros((len(self.feat_dict_), k))
        self.T1_ = np.zeros((k + 1, k))
        self.T2_: dict[tuple[int, int, int], float] = {}
        self.survival_ = {}

        rng = random.Random(self.seed)
        self._sgd_stage0(caches, rng)
        tau0, tau1 = self._thresholds()
        for cache in caches:
            cache.domains = [
                self._prune_local(rows, tau0) for rows in cache.rows
            ]
        self.survival_[0] = self._record_survival(caches, "domains", 0)
        self._sgd_stage1(caches, rng)
        if self.order == 2:
            for cache in caches:
                cache.domains2 = self._prune_order1(cache.rows, cache.domains, tau1)
            self.survival_[1] = self._record_survival(caches, "domains2", 1)
            self._sgd_stage2(caches, rng)
        return self

    def _thresholds(self) -> tuple[float, float]:
        t = self.prune_threshold
        if isinstance(t, (int, float)):
            return float(t), float(t)
        t0, t1 = t
        return float(t0), float(t1)

    def _record_survival(self, caches, attr, level) -> float:
        total = kept = 0
        for cache in caches:
            domains = getattr(cache, attr)
            for gold, dom in zip(cache.gold, domains):
                total += 1
                if gold in dom:
                    kept += 1
        rate = kept / total if total else 1.0
        logger.info("gold-tag lattice survival at level %d: %.4f", level, rate)
        return rate

    def _sgd_stage0(self, caches, rng) -> None:
        steps_per_epoch = max(1, sum(len(c.rows) for c in caches))
        t = 0
        for _ in range(self.epochs):
            order = list(range(len(caches)))
            rng.shuffle(order)
            for si in order:
                cache = caches[si]
                for rows, gold in zip(cache.rows, cache.gold):
                    eta = self.eta0 / (1.0 + t / steps_per_epoch)
                    t += 1
                    scores = self.W_[rows].sum(axis=0)
                    scores -= scores.max()
                    p = np.exp(scores)
                    p /= p.sum()
                    p[gold] -= 1.0
                    self.W_[rows] -= eta * p
        logger.debug("stage-0 training done (%d steps)", t)

    def _sgd_stage1(self, caches, rng) -> None:
        trainable = [c for c in caches if all(g in d for g, d in zip(c.gold, c.domains))]
        dropped = len(caches) - len(trainable)
        if dropped:
            logger.warning("stage 1: %d sentences dropped (gold tag pruned)", dropped)
        if not trainable:
            return
        steps_per_epoch = len(trainable)
        t = 0
        for _ in range(self.epochs):
            rng.shuffle(trainable)
            for cache in trainable:
                eta = self.eta0 / (1.0 + t / steps_per_epoch)
                t += 1
                self._update_order1(cache, eta)

    def _update_order1(
        self, cache: _SentenceCache, eta: float,
        extra: Optional[list[np.ndarray]] = None,
    ) -> tuple[list[np.ndarray], list[np.ndarray]]:
        domains = cache.domains
        node, edge = self._order1_potentials(cache.rows, domains, extra)
        _, unary, edges = chain_forward_backward(node, edge)
        for i, (rows, dom) in enumerate(zip(cache.rows, domains)):
            marg = np.exp(unary[i])
            gold = cache.gold[i]
            gold_pos = int(np.searchsorted(dom, gold))
            update = -marg
            update[gold_pos] += 1.0
            self.W_[np.ix_(rows, dom)] += eta * update[None, :]
            if i == 0:
                self.T1_[self.boundary_, dom] += eta * update
            else:
                pair = np.exp(edges[i - 1])
                self.T1_[np.ix_(domains[i - 1], dom)] -= eta * pair
                self.T1_[cache.gold[i - 1], gold] += eta
        return unary, edges

    def _sgd_stage2(self, caches, rng) -> None:
        trainable = [c for c in caches if all(g in d for g, d in zip(c.gold, c.domains2))]
        dropped = len(caches) - len(trainable)
        if dropped:
            logger.warning("stage 2: %d sentences dropped (gold tag pruned)", dropped)
        if not trainable:
            return
        steps_per_epoch = len(trainable)
        t = 0
        for _ in range(self.epochs):
            rng.shuffle(trainable)
            for cache in trainable:
                eta = self.eta0 / (1.0 + t / steps_per_epoch)
                t += 1
                self._update_order2(cache, eta)

    def _update_order2(
        self, cache: _SentenceCache, eta: float,
        extra: Optional[list[np.ndarray]] = None,
    ) -> tuple[list[list[tuple[int, int]]], list[np.ndarray], list[np.ndarray]]:
        domains = cache.domains2
        states, node, edge = self._order2_potentials(cache.rows, domains, extra)
        _, unary, edges = chain_forward_backward(node, edge)
        b = self.boundary_
        gold = cache.gold
        for i, rows in enumerate(cache.rows):
            marg = np.exp(unary[i])
            state_list = states[i]
            # tag-level expectations for emission and first-order weights
            for (a, c), m in zip(state_list, marg):
                self.W_[rows, c] -= eta * m
                self.T1_[a, c] -= eta * m
                if i == 0:
                    self.T2_[(b, b, c)] = self.T2_.get((b, b, c), 0.0) - eta * m
            self.W_[rows, gold[i]] += eta
            prev_gold = gold[i - 1] if i > 0 else b
            self.T1_[prev_gold, gold[i]] += eta
            if i == 0:
                key = (b, b, gold[0])
                self.T2_[key] = self.T2_.get(key, 0.0) + eta
        for i in range(1, len(cache.rows)):
            pair = np.exp(edges[i - 1])
            prev_states = states[i - 1]
            cur_states = states[i]
            for pi, (a, bb) in enumerate(prev_states):
                row = pair[pi]
                for ci, (bb2, c) in enumerate(cur_states):
                    if bb2 != bb:
                        continue
                    m = row[ci]
                    if m == 0.0:
                        continue
                    key = (a if i > 1 else b, bb, c)
                    self.T2_[key] = self.T2_.get(key, 0.0) - eta * m
            key = (
                gold[i - 2] if i > 1 else b,
                gold[i - 1],
                gold[i],
            )
            self.T2_[key] = self.T2_.get(key, 0.0) + eta
        return states, unary, edges

    # ------------------------------------------------------------------
    # lattice construction
    # ------------------------------------------------------------------

    def _local_rows(self, forms: Sequence[str]) -> list[np.ndarray]:
        rows = []
        for i in range(len(forms)):
            idx = [
                self.feat_dict_.intern(n)
                for n in tag_features(forms, i, self.max_affix_len)
            ]
            rows.append(np.asarray([j for j in idx if j is not None], dtype=np.int64))
        return rows

    def _emission(self, rows: np.ndarray) -> np.ndarray:
        if len(rows) == 0:
            return np.zeros(len(self.tags_))
        return self.W_[rows].sum(axis=0)

    def _prune_local(self, rows: np.ndarray, tau: float) -> np.ndarray:
        scores = self._emission(rows)
        scores = scores - scores.max()
        log_p = scores - np.log(np.exp(scores).sum())
        return self._apply_threshold(log_p, tau)

    @staticmethod
    def _apply_threshold(log_p: np.ndarray, tau: float) -> np.ndarray:
        if tau <= 0.0:
            return np.arange(len(log_p), dtype=np.int64)
        keep = log_p >= log_p.max() + np.log(tau) - 1e-12
        return np.nonzero(keep)[0].astype(np.int64)

    def _order1_potentials(
        self, rows: list[np.ndarray], domains: list[np.ndarray],
        extra: Optional[list[np.ndarray]] = None,
    ) -> tuple[list[np.ndarray], list[Optional[np.ndarray]]]:
        node: list[np.ndarray] = []
        edge: list[Optional[np.ndarray]] = [None]
        for i, (r, dom) in enumerate(zip(rows, domains)):
            pot = self._emission(r)[dom]
            if extra is not None:
                pot = pot + extra[i]
            if i == 0:
                pot = pot + self.T1_[self.boundary_, dom]
            else:
                edge.append(self.T1_[np.ix_(domains[i - 1], dom)])
            node.append(pot)
        return node, edge

    def _prune_order1(
        self, rows: list[np.ndarray], domains: list[np.ndarray], tau: float
    ) -> list[np.ndarray]:
        node, edge = self._order1_potentials(rows, domains)
        _, unary, _ = chain_forward_backward(node, edge)
        pruned = []
        for dom, log_marg in zip(domains, unary):
            keep = self._apply_threshold(log_marg, tau)
            pruned.append(dom[keep])
        return pruned

    def _order2_states(
        self, domains: list[np.ndarray]
    ) -> list[list[tuple[int, int]]]:
        states = [[(self.boundary_, int(c)) for c in domains[0]]]
        for i in range(1, len(domains)):
            states.append(
                [(int(a), int(c)) for a in domains[i - 1] for c in domains[i]]
            )
        return states

    def _order2_potentials(
        self, rows: list[np.ndarray], domains: list[np.ndarray],
        extra: Optional[list[np.ndarray]] = None,
    ):
        """Pair-state expansion: state (a, c) at i means tag a at i-1, c at i."""
        b = self.boundary_
        states = self._order2_states(domains)
        node: list[np.ndarray] = []
        for i, state_list in enumerate(states):
            emission = self._emission(rows[i])
            pot = np.empty(len(state_list))
            for si, (a, c) in enumerate(state_list):
                prev = a if i > 0 else b
                pot[si] = emission[c] + self.T1_[prev, c]
                if i == 0:
                    pot[si] += self.T2_.get((b, b, c), 0.0)
                if extra is not None:
                    pot[si] += extra[i][int(np.searchsorted(domains[i], c))]
            node.append(pot)
        edge: list[Optional[np.ndarray]] = [None]
        for i in range(1, len(states)):
            prev_states = states[i - 1]
            cur_states = states[i]
            mat = np.full((len(prev_states), len(cur_states)), -np.inf)
            for pi, (a, bb) in enumerate(prev_states):
                for ci, (bb2, c) in enumerate(cur_states):
                    if bb2 == bb:
                        mat[pi, ci] = self.T2_.get((a if i > 1 else b, bb, c), 0.0)
            edge.append(mat)
        return states, node, edge

    def build_domains(self, forms: Sequence[str]) -> list[np.ndarray]:
        """Pruned per-position tag domains for decoding, at the final order."""
        self._check_fitted()
        tau0, tau1 = self._thresholds()
        rows = self._local_rows(forms)
        domains = [self._prune_local(r, tau0) for r in rows]
        if self.order == 2:
            domains = self._prune_order1(rows, domains, tau1)
        return domains

    # ------------------------------------------------------------------
    # inference
    # ------------------------------------------------------------------

    def tag_sentence(self, forms: Sequence[str]) -> list[MorphTag]:
        """Viterbi decode over the pruned lattice."""
        self._check_fitted()
        if not forms:
            return []
        rows = self._local_rows(forms)
        tau0, tau1 = self._thresholds()
        domains = [self._prune_local(r, tau0) for r in rows]
        if self.order == 1:
            node, edge = self._order1_potentials(rows, domains)
            _, path = chain_viterbi(node, edge)
            indices = [int(domains[i][p]) for i, p in enumerate(path)]
        else:
            domains = self._prune_order1(rows, domains, tau1)
            states, node, edge = self._order2_potentials(rows, domains)
            _, path = chain_viterbi(node, edge)
            indices = [states[i][p][1] for i, p in enumerate(path)]
        return [self.tag_objs_[i] for i in indices]

    def predict(self, X: Sequence[Sequence[str]]) -> list[list[MorphTag]]:
        return [self.tag_sentence(forms) for forms in X]

    def marginals(
        self, forms: Sequence[str]
    ) -> tuple[list[dict[str, float]], list[dict[tuple[str, str], float]]]:
        """Per-position tag marginals and pairwise transition marginals."""
        self._check_fitted()
        rows = self._local_rows(forms)
        tau0, tau1 = self._thresholds()
        domains = [self._prune_local(r, tau0) for r in rows]
        if self.order == 1:
            node, edge = self._order1_potentials(rows, domains)
            _, unary, edges = chain_forward_backward(node, edge)
            unary_out = [
                {self.tags_[int(t)]: float(np.exp(lp))
                 for t, lp in zip(domains[i], unary[i])}
                for i in range(len(forms))
            ]
            pair_out = []
            for i in range(1, len(forms)):
                probs = np.exp(edges[i - 1])
                pair_out.append({
                    (self.tags_[int(a)], self.tags_[int(c)]): float(probs[ai, ci])
                    for ai, a in enumerate(domains[i - 1])
                    for ci, c in enumerate(domains[i])
                })
        else:
            domains = self._prune_order1(rows, domains, tau1)
            states, node, edge = self._order2_potentials(rows, domains)
            _, unary, _ = chain_forward_backward(node, edge)
            unary_out = []
            pair_out = []
            for i in range(len(forms)):
                marg = np.exp(unary[i])
                tag_probs: dict[str, float] = {}
                pair_probs: dict[tuple[str, str], float] = {}
                for (a, c), m in zip(states[i], marg):
                    tag_probs[self.tags_[c]] = tag_probs.get(self.tags_[c], 0.0) + float(m)
                    if i > 0:
                        key = (self.tags_[a], self.tags_[c])
                        pair_probs[key] = pair_probs.get(key, 0.0) + float(m)
                unary_out.append(tag_probs)
                if i > 0:
                    pair_out.append(pair_probs)
        for dist in unary_out:
            total = sum(dist.values())
            if not np.isfinite(total) or abs(total - 1.0) > 1e-6:
                raise FloatingPointError("tag marginals do not normalize")
        return unary_out, pair_out

    def _check_fitted(self) -> None:
        if not hasattr(self, "W_"):
            raise NotFittedError("CrfTagger is not fitted yet")


def _as_tag(tag: TagLike) -> MorphTag:
    return tag if isinstance(tag, MorphTag) else MorphTag.parse(tag)
