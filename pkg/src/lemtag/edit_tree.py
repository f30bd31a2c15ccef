"""Edit trees: recursive programs that rewrite an inflected form into its lemma.

A tree is extracted from a (form, lemma) pair by locating a longest common
substring (LCS) and recursing on the unmatched prefix and suffix pairs.
Interior nodes store only the prefix and suffix lengths of the form, never
the LCS characters, so one tree generalizes across stems: the tree extracted
from ("worked", "work") also rewrites "touched" to "touch".

All operations are pure functions on immutable values and may be called
concurrently.  Lengths and indices count Unicode scalar values, never bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

__all__ = [
    "SubNode",
    "LcsNode",
    "EditTree",
    "AlignmentError",
    "TreeSyntaxError",
    "longest_common_substring",
    "extract_tree",
    "apply_tree",
    "alignment",
    "identity_tree",
    "render_tree",
    "parse_tree",
]


@dataclass(frozen=True)
class SubNode:
    """Leaf replacing the whole input slice ``src`` with ``dst``.

    Applies only when the input equals ``src`` exactly.  ``src == dst == ""``
    is the canonical identity leaf for empty slices.
    """

    src: str
    dst: str


@dataclass(frozen=True)
class LcsNode:
    """Interior node: rewrite the outer slices, copy the middle verbatim.

    ``prefix_len`` and ``suffix_len`` count characters of the *input* slice.
    The untouched middle is whatever remains between them, which is what lets
    a tree apply to forms it was not extracted from.
    """

    left: "EditTree"
    prefix_len: int
    right: "EditTree"
    suffix_len: int


EditTree = Union[SubNode, LcsNode]


class AlignmentError(ValueError):
    """Raised when an alignment is requested for a pair the tree does not map."""


class TreeSyntaxError(ValueError):
    """Raised when a textual tree rendering cannot be parsed."""


def longest_common_substring(x: str, y: str) -> Optional[tuple[int, int, int, int]]:
    """Return a span quadruple (i_s, i_e, j_s, j_e) of a longest common substring.

    ``x[i_s:i_e] == y[j_s:j_e]`` and no common substring is longer.  Ties are
    broken toward the smallest start in x, then the smallest start in y, which
    keeps tree extraction deterministic.  Returns None when the strings share
    no character.
    """
    n, m = len(x), len(y)
    if n == 0 or m == 0:
        return None
    best_len = 0
    best: Optional[tuple[int, int, int, int]] = None
    # prev[j] = length of the longest common suffix of x[:i] and y[:j].
    prev = [0] * (m + 1)
    for i in range(1, n + 1):
        cur = [0] * (m + 1)
        xc = x[i - 1]
        for j in range(1, m + 1):
            if xc == y[j - 1]:
                k = prev[j - 1] + 1
                cur[j] = k
                # Strictly-greater keeps the first maximal match in row-major
                # order, i.e. smallest i_s, then smallest j_s.
                if k > best_len:
                    best_len = k
                    best = (i - k, i, j - k, j)
        prev = cur
    return best


def extract_tree(x: str, y: str) -> EditTree:
    """Extract the canonical edit tree transforming form ``x`` into lemma ``y``."""
    span = longest_common_substring(x, y)
    if span is None:
        return SubNode(x, y)
    i_s, i_e, j_s, j_e = span
    return LcsNode(
        left=extract_tree(x[:i_s], y[:j_s]),
        prefix_len=i_s,
        right=extract_tree(x[i_e:], y[j_e:]),
        suffix_len=len(x) - i_e,
    )


def apply_tree(tree: EditTree, x: str) -> Optional[str]:
    """Apply ``tree`` to ``x``; return the output string or None if inapplicable.

    Inapplicability (prefix/suffix do not fit, or a substitution mismatch) is
    never an exception: None signals that this tree produces no output for
    this input.
    """
    if isinstance(tree, SubNode):
        return tree.dst if x == tree.src else None
    if len(x) < tree.prefix_len + tree.suffix_len:
        return None
    prefix = apply_tree(tree.left, x[: tree.prefix_len])
    if prefix is None:
        return None
    suffix = apply_tree(tree.right, x[len(x) - tree.suffix_len:])
    if suffix is None:
        return None
    return prefix + x[tree.prefix_len: len(x) - tree.suffix_len] + suffix


def alignment(tree: EditTree, x: str, y: str) -> list[tuple[str, str]]:
    """Segment-level alignment of ``x`` and ``y`` as read off ``tree``.

    Characters copied through interior nodes align one to one; each
    substitution leaf aligns block-wise.  Empty segments are empty strings;
    vacuous ("", "") pairs are omitted.  Requires apply_tree(tree, x) == y.
    """
    if apply_tree(tree, x) != y:
        raise AlignmentError(
            f"tree does not transform {x!r} into {y!r}; alignment is undefined"
        )
    return [pair for pair in _collect_alignment(tree, x) if pair != ("", "")]


def _collect_alignment(tree: EditTree, x: str) -> list[tuple[str, str]]:
    if isinstance(tree, SubNode):
        return [(x, tree.dst)]
    pairs = _collect_alignment(tree.left, x[: tree.prefix_len])
    middle = x[tree.prefix_len: len(x) - tree.suffix_len]
    pairs.extend((c, c) for c in middle)
    pairs.extend(_collect_alignment(tree.right, x[len(x) - tree.suffix_len:]))
    return pairs


def identity_tree() -> EditTree:
    """The tree that maps every string to itself."""
    return LcsNode(SubNode("", ""), 0, SubNode("", ""), 0)


def render_tree(tree: EditTree) -> str:
    """Canonical textual rendering, e.g. ``(lcs 4 1 (sub "ge" "") (sub "t" "en"))``."""
    if isinstance(tree, SubNode):
        return f"(sub {_quote(tree.src)} {_quote(tree.dst)})"
    return (
        f"(lcs {tree.prefix_len} {tree.suffix_len} "
        f"{render_tree(tree.left)} {render_tree(tree.right)})"
    )


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def parse_tree(text: str) -> EditTree:
    """Parse a rendering produced by :func:`render_tree`; inverse up to equality."""
    tree, pos = _parse_node(text, 0)
    if text[pos:].strip():
        raise TreeSyntaxError(f"trailing junk after tree at offset {pos}")
    return tree


def _parse_node(text: str, pos: int) -> tuple[EditTree, int]:
    pos = _skip_ws(text, pos)
    if pos >= len(text) or text[pos] != "(":
        raise TreeSyntaxError(f"expected '(' at offset {pos}")
    pos = _skip_ws(text, pos + 1)
    if text.startswith("sub", pos):
        src, pos = _parse_string(text, pos + 3)
        dst, pos = _parse_string(text, pos)
        pos = _expect(text, pos, ")")
        return SubNode(src, dst), pos
    if text.startswith("lcs", pos):
        prefix_len, pos = _parse_int(text, pos + 3)
        suffix_len, pos = _parse_int(text, pos)
        left, pos = _parse_node(text, pos)
        right, pos = _parse_node(text, pos)
        pos = _expect(text, pos, ")")
        return LcsNode(left, prefix_len, right, suffix_len), pos
    raise TreeSyntaxError(f"expected 'sub' or 'lcs' at offset {pos}")


def _skip_ws(text: str, pos: int) -> int:
    while pos < len(text) and text[pos].isspace():
        pos += 1
    return pos


def _expect(text: str, pos: int, char: str) -> int:
    pos = _skip_ws(text, pos)
    if pos >= len(text) or text[pos] != char:
        raise TreeSyntaxError(f"expected {char!r} at offset {pos}")
    return pos + 1


def _parse_int(text: str, pos: int) -> tuple[int, int]:
    pos = _skip_ws(text, pos)
    start = pos
    while pos < len(text) and text[pos].isdigit():
        pos += 1
    if pos == start:
        raise TreeSyntaxError(f"expected integer at offset {start}")
    return int(text[start:pos]), pos


def _parse_string(text: str, pos: int) -> tuple[str, int]:
    pos = _skip_ws(text, pos)
    if pos >= len(text) or text[pos] != '"':
        raise TreeSyntaxError(f"expected '\"' at offset {pos}")
    pos += 1
    out: list[str] = []
    while pos < len(text):
        c = text[pos]
        if c == "\\":
            if pos + 1 >= len(text):
                raise TreeSyntaxError("dangling escape at end of input")
            out.append(text[pos + 1])
            pos += 2
        elif c == '"':
            return "".join(out), pos + 1
        else:
            out.append(c)
            pos += 1
    raise TreeSyntaxError("unterminated string literal")
