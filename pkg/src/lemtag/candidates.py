"""Build the edit-tree inventory and generate lemma candidates per form.

The inventory keeps every tree extracted from at least ``min_pair_count``
distinct training (form, lemma) pairs; candidate sets for a form are the
outputs of all applicable trees plus every lemma the form was seen with.
Trees are extracted from lowercased pairs; candidate generation lowercases
the form before tree application and re-capitalizes outputs to the form's
capitalization class so that e.g. capitalized nouns receive capitalized
lemma candidates.

Built inventories and tables are immutable and safe to share across threads.
"""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .edit_tree import EditTree, apply_tree, extract_tree, identity_tree, render_tree

__all__ = [
    "TreeInventory",
    "SeenLemmaTable",
    "CandidateEntry",
    "CandidateSet",
    "build_inventory",
    "generate_candidates",
    "coverage_stats",
]

logger = logging.getLogger(__name__)


class TreeInventory:
    """Pruned edit-tree inventory with stable, serialization-safe tree ids.

    Trees are ordered by descending pair count, then rendering, so the id of
    a tree is deterministic for a given training set.  The identity tree is
    always present (possibly with a count below the threshold) so candidate
    sets are never empty.
    """

    def __init__(self, trees_with_counts: Iterable[tuple[EditTree, int]], min_pair_count: int):
        if min_pair_count < 1:
            raise ValueError("min_pair_count must be >= 1")
        items = sorted(trees_with_counts, key=lambda tc: (-tc[1], render_tree(tc[0])))
        self.trees: tuple[EditTree, ...] = tuple(t for t, _ in items)
        self.counts: dict[EditTree, int] = {t: c for t, c in items}
        self.min_pair_count = min_pair_count
        self._ids = {t: i for i, t in enumerate(self.trees)}

    def __len__(self) -> int:
        return len(self.trees)

    def __contains__(self, tree: EditTree) -> bool:
        return tree in self._ids

    def tree_id(self, tree: EditTree) -> int:
        return self._ids[tree]

    def count(self, tree: EditTree) -> int:
        return self.counts.get(tree, 0)


class SeenLemmaTable:
    """Exact (form -> lemmata) memory of the training set."""

    def __init__(self, pairs: Iterable[tuple[str, str]]):
        table: dict[str, set[str]] = defaultdict(set)
        for form, lemma in pairs:
            table[form].add(lemma)
        self._table: dict[str, tuple[str, ...]] = {
            form: tuple(sorted(lemmata)) for form, lemmata in table.items()
        }

    def __len__(self) -> int:
        return len(self._table)

    def lemmata(self, form: str) -> tuple[str, ...]:
        return self._table.get(form, ())

    def items(self):
        return self._table.items()


@dataclass(frozen=True)
class CandidateEntry:
    """One candidate lemma with its provenance.

    ``trees`` holds the ids of every inventory tree producing this lemma, in
    inventory order (most frequent first); empty for seen-only candidates.
    """

    lemma: str
    trees: tuple[int, ...]
    seen: bool

    @property
    def provenance(self) -> str:
        if self.trees and self.seen:
            return "both"
        return "tree" if self.trees else "seen"


@dataclass(frozen=True)
class CandidateSet:
    """The support of the lemma distribution for one form."""

    form: str
    entries: tuple[CandidateEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def lemmata(self) -> tuple[str, ...]:
        return tuple(e.lemma for e in self.entries)


def build_inventory(
    pairs: Sequence[tuple[str, str]], min_pair_count: int = 2
) -> tuple[TreeInventory, SeenLemmaTable]:
    """Extract, count and prune edit trees from training (form, lemma) pairs.

    Counting is per distinct (form, lemma) type, case-lowered for extraction;
    duplicate tokens of the same pair count once.  Trees below
    ``min_pair_count`` are dropped, except the identity tree which is always
    retained.  The seen-lemma table keeps the original capitalization.
    """
    if not pairs:
        raise ValueError("cannot build an inventory from an empty training set")
    if min_pair_count < 1:
        raise ValueError("min_pair_count must be >= 1")
    types = sorted({(form.lower(), lemma.lower()) for form, lemma in pairs})
    tree_counts: Counter[EditTree] = Counter()
    for form, lemma in types:
        tree_counts[extract_tree(form, lemma)] += 1
    identity = identity_tree()
    kept = [
        (tree, count)
        for tree, count in tree_counts.items()
        if count >= min_pair_count or tree == identity
    ]
    if identity not in tree_counts:
        kept.append((identity, 0))
    inventory = TreeInventory(kept, min_pair_count)
    seen = SeenLemmaTable(pairs)
    logger.debug(
        "inventory: %d trees kept of %d extracted (threshold %d)",
        len(inventory), len(tree_counts), min_pair_count,
    )
    return inventory, seen


def _capitalization_class(s: str) -> str:
    if not s or s == s.lower():
        return "lower"
    if len(s) > 1 and s == s.upper():
        return "upper"
    if s[0].upper() == s[0] and s[1:] == s[1:].lower():
        return "first"
    return "mixed"


def _match_capitalization(lemma: str, form: str) -> str:
    cls = _capitalization_class(form)
    if cls == "upper":
        return lemma.upper()
    if cls == "first":
        return lemma[:1].upper() + lemma[1:]
    return lemma


def generate_candidates(
    form: str, inventory: TreeInventory, seen: SeenLemmaTable
) -> CandidateSet:
    """All lemma candidates for ``form``: tree outputs plus seen lemmata.

    The form is lowercased before tree application; each output is kept as
    produced and, when the form is capitalized, additionally re-capitalized
    to the form's capitalization class.  An empty result is legal output and
    signals upstream misconfiguration (an inventory without identity tree).
    """
    lowered = form.lower()
    by_lemma: dict[str, list[int]] = {}
    for tree_id, tree in enumerate(inventory.trees):
        output = apply_tree(tree, lowered)
        if output is None:
            continue
        variants = {output, _match_capitalization(output, form)}
        for lemma in variants:
            by_lemma.setdefault(lemma, []).append(tree_id)
    seen_lemmata = set(seen.lemmata(form))
    entries = [
        CandidateEntry(lemma, tuple(tree_ids), lemma in seen_lemmata)
        for lemma, tree_ids in by_lemma.items()
    ]
    entries.extend(
        CandidateEntry(lemma, (), True)
        for lemma in sorted(seen_lemmata - set(by_lemma))
    )
    entries.sort(key=lambda e: e.lemma)
    return CandidateSet(form, tuple(entries))


def coverage_stats(
    held_out: Sequence[tuple[str, str]],
    inventory: TreeInventory,
    seen: SeenLemmaTable,
    cache: Optional[Mapping[str, CandidateSet]] = None,
) -> tuple[float, float]:
    """Mean candidate-set size and gold-lemma coverage on held-out pairs.

    Lemma matching ignores capitalization.  ``cache`` may map forms to
    precomputed candidate sets to avoid regenerating them per token.
    """
    if not held_out:
        raise ValueError("held-out data must be non-empty")
    local_cache: dict[str, CandidateSet] = dict(cache) if cache else {}
    total = 0
    covered = 0
    for form, lemma in held_out:
        cand = local_cache.get(form)
        if cand is None:
            cand = generate_candidates(form, inventory, seen)
            local_cache[form] = cand
        total += len(cand)
        gold = lemma.lower()
        if any(entry.lemma.lower() == gold for entry in cand.entries):
            covered += 1
    n = len(held_out)
    return total / n, covered / n
