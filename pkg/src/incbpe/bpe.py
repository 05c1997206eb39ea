"""Byte-pair encoding with nested, extendable merge tables.

Learning is greedy: the most frequent adjacent pair is merged at each step,
ties going to the lexicographically smallest ``(left, right)``. Because the
choice at step ``i`` depends only on the data and the first ``i`` merges,
a table learned for ``k`` operations is an exact prefix of any table learned
for more. That prefix property is what lets a vocabulary grow online.

Words carry no end-of-word sentinel. Continuation markers (``@@``) are added
to every non-final piece only when segmentations are rendered as tokens.
"""

from __future__ import annotations

import heapq
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from . import kernels
from ._io import atomic_writer, read_lines
from .errors import (
    InconsistentMergesError,
    InvalidInputError,
    MalformedInputError,
    MalformedInputWarning,
)

MARKER = "@@"
MERGES_HEADER = "#incbpe merges v1"

Pair = tuple[str, str]


@dataclass(frozen=True, slots=True)
class MergeOp:
    left: str
    right: str

    @property
    def result(self) -> str:
        return self.left + self.right

    @property
    def pair(self) -> Pair:
        return (self.left, self.right)


class MergeTable:
    """Ordered, immutable sequence of merge operations.

    Each component of op ``i`` is either a single character or the result of
    an op ranked below ``i``; pairs are unique. Both are checked on
    construction.
    """

    __slots__ = ("_ops", "_ranks")

    def __init__(self, ops: Iterable[MergeOp | Pair] = ()):
        built: list[MergeOp] = []
        ranks: dict[Pair, int] = {}
        produced: set[str] = set()
        for i, op in enumerate(ops):
            if not isinstance(op, MergeOp):
                op = MergeOp(*op)
            if not op.left or not op.right:
                raise InvalidInputError(f"merge {i} has an empty component")
            if op.pair in ranks:
                raise InvalidInputError(f"duplicate merge {op.left!r} {op.right!r} at rank {i}")
            for part in op.pair:
                if len(part) > 1 and part not in produced:
                    raise InvalidInputError(
                        f"merge {i} uses {part!r}, which no earlier merge produces"
                    )
            ranks[op.pair] = i
            produced.add(op.result)
            built.append(op)
        self._ops = tuple(built)
        self._ranks = ranks

    @property
    def ops(self) -> tuple[MergeOp, ...]:
        return self._ops

    @property
    def ranks(self) -> Mapping[Pair, int]:
        return self._ranks

    def rank(self, left: str, right: str) -> int | None:
        return self._ranks.get((left, right))

    def prefix(self, k: int) -> "MergeTable":
        _check_k(k, len(self))
        return MergeTable(self._ops[:k])

    def is_prefix_of(self, other: "MergeTable") -> bool:
        return len(self) <= len(other) and other._ops[: len(self)] == self._ops

    def __len__(self) -> int:
        return len(self._ops)

    def __iter__(self):
        return iter(self._ops)

    def __getitem__(self, i):
        return self._ops[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, MergeTable) and self._ops == other._ops

    def __hash__(self) -> int:
        return hash(self._ops)

    def __repr__(self) -> str:
        shown = ", ".join(f"{op.left}+{op.right}" for op in self._ops[:5])
        more = ", ..." if len(self) > 5 else ""
        return f"MergeTable([{shown}{more}], n={len(self)})"


@dataclass(frozen=True, slots=True)
class SegmentedWord:
    """Pieces of one word. ``tokens`` is the surface form with markers."""

    pieces: tuple[str, ...]
    tokens: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        if not self.pieces:
            raise InvalidInputError("a segmented word needs at least one piece")
        marked = tuple(p + MARKER for p in self.pieces[:-1]) + (self.pieces[-1],)
        object.__setattr__(self, "tokens", marked)

    @property
    def word(self) -> str:
        return "".join(self.pieces)

    def __len__(self) -> int:
        return len(self.pieces)


def _check_k(k: int, n: int) -> None:
    if k < 0 or k > n:
        raise InvalidInputError(f"merge count {k} outside [0, {n}]")


def check_freqs(freqs: Mapping[str, int]) -> None:
    if not freqs:
        raise InvalidInputError("word frequency map is empty")
    for word, count in freqs.items():
        if not word:
            raise InvalidInputError("word frequency map has an empty word")
        if any(ch.isspace() for ch in word):
            raise InvalidInputError(f"word {word!r} contains whitespace")
        if not isinstance(count, int) or count < 1:
            raise InvalidInputError(f"word {word!r} has non-positive count {count!r}")


def word_frequencies(sentences: Iterable[Sequence[str] | str]) -> dict[str, int]:
    """Count word types over tokenized sentences (strings are split on spaces)."""
    counts: Counter[str] = Counter()
    for sent in sentences:
        tokens = sent.split() if isinstance(sent, str) else sent
        counts.update(tokens)
    return dict(counts)


def count_pairs(
    freqs: Mapping[str, int], segmentation: Mapping[str, Sequence[str]]
) -> dict[Pair, int]:
    """Frequency-weighted adjacent pair counts under the given segmentation."""
    words = []
    weights = []
    for word, count in freqs.items():
        try:
            words.append(list(segmentation[word]))
        except KeyError:
            raise InvalidInputError(f"no segmentation for word {word!r}") from None
        weights.append(count)
    return kernels.weighted_pair_counts(words, weights)


class BPELearner:
    """Stateful greedy learner; each :meth:`step` adds one merge.

    Pair counts are updated only for the words touched by a merge, and a
    lazily-invalidated heap keyed on ``(-count, left, right)`` yields the
    most frequent pair with the lexicographic tie-break.
    """

    def __init__(self, freqs: Mapping[str, int], min_count: int = 2):
        check_freqs(freqs)
        self.min_count = min_count
        words = sorted(freqs)
        self._weights = [freqs[w] for w in words]
        self._segs: list[list[str]] = [list(w) for w in words]
        self._words = words
        self._counts: dict[Pair, int] = {}
        self._where: dict[Pair, set[int]] = {}
        for idx, seg in enumerate(self._segs):
            weight = self._weights[idx]
            for pair, n in kernels.word_pairs(seg).items():
                self._counts[pair] = self._counts.get(pair, 0) + n * weight
                self._where.setdefault(pair, set()).add(idx)
        self._heap = [(-c, a, b) for (a, b), c in self._counts.items()]
        heapq.heapify(self._heap)
        self.ops: list[MergeOp] = []

    @property
    def alphabet(self) -> set[str]:
        return {ch for w in self._words for ch in w}

    def segmentation(self) -> dict[str, tuple[str, ...]]:
        return {w: tuple(s) for w, s in zip(self._words, self._segs)}

    def pair_count(self, left: str, right: str) -> int:
        return self._counts.get((left, right), 0)

    def best_pair(self) -> tuple[Pair, int] | None:
        heap = self._heap
        while heap:
            neg, a, b = heap[0]
            if self._counts.get((a, b), 0) == -neg:
                return (a, b), -neg
            heapq.heappop(heap)
        return None

    def step(self) -> MergeOp | None:
        """Merge the best pair, or return None if nothing reaches ``min_count``."""
        best = self.best_pair()
        if best is None or best[1] < self.min_count:
            return None
        op = MergeOp(*best[0])
        self._apply(op)
        return op

    def learn(self, n_ops: int) -> list[MergeOp]:
        added = []
        for _ in range(n_ops):
            op = self.step()
            if op is None:
                break
            added.append(op)
        return added

    def replay(self, table: MergeTable) -> None:
        """Re-apply ``table``, checking each op is what learning would choose."""
        for i, op in enumerate(table):
            best = self.best_pair()
            if best is None or self._counts.get(op.pair, 0) == 0:
                raise InconsistentMergesError(
                    f"merge {i} ({op.left!r} {op.right!r}) never occurs in the corpus at that point"
                )
            if best[0] != op.pair or best[1] < self.min_count:
                raise InconsistentMergesError(
                    f"merge {i} ({op.left!r} {op.right!r}) is not the learner's choice "
                    f"({best[0][0]!r} {best[0][1]!r}, count {best[1]}); "
                    "the table was learned from different data"
                )
            self._apply(op)

    def table(self) -> MergeTable:
        return MergeTable(self.ops)

    def _apply(self, op: MergeOp) -> None:
        counts = self._counts
        where = self._where
        heap = self._heap
        left, right, merged = op.left, op.right, op.result
        touched: set[Pair] = set()
        for idx in sorted(where.pop(op.pair, ())):
            old = self._segs[idx]
            new = kernels.merge_pair(old, left, right, merged)
            weight = self._weights[idx]
            old_pairs = kernels.word_pairs(old)
            new_pairs = kernels.word_pairs(new)
            for pair, n in old_pairs.items():
                counts[pair] -= n * weight
                touched.add(pair)
                if pair not in new_pairs and pair != op.pair:
                    where[pair].discard(idx)
            for pair, n in new_pairs.items():
                counts[pair] = counts.get(pair, 0) + n * weight
                touched.add(pair)
                where.setdefault(pair, set()).add(idx)
            self._segs[idx] = new
        for pair in touched:
            c = counts.get(pair, 0)
            if c > 0:
                heapq.heappush(heap, (-c, pair[0], pair[1]))
            else:
                counts.pop(pair, None)
                if not where.get(pair, True):
                    del where[pair]
        self.ops.append(op)


def learn_merges(freqs: Mapping[str, int], n_ops: int) -> MergeTable:
    """Learn up to ``n_ops`` merges; stops early once no pair occurs twice."""
    if n_ops < 0:
        raise InvalidInputError(f"n_ops must be >= 0, got {n_ops}")
    learner = BPELearner(freqs)
    learner.learn(n_ops)
    return learner.table()


def extend_merges(freqs: Mapping[str, int], base: MergeTable, n_additional: int) -> MergeTable:
    """Grow ``base`` by up to ``n_additional`` merges learned from ``freqs``.

    The result equals ``learn_merges(freqs, len(base) + n_additional)``;
    ``base`` is verified step by step and must have come from ``freqs``.
    """
    if n_additional < 0:
        raise InvalidInputError(f"n_additional must be >= 0, got {n_additional}")
    learner = BPELearner(freqs)
    learner.replay(base)
    learner.learn(n_additional)
    return learner.table()


def segment_word(word: str, table: MergeTable, k: int | None = None) -> SegmentedWord:
    """Split ``word`` into characters and apply the first ``k`` merges in rank order."""
    if not word:
        raise InvalidInputError("cannot segment an empty word")
    if word.endswith(MARKER):
        raise InvalidInputError(f"word {word!r} ends with the continuation marker")
    if k is None:
        k = len(table)
    _check_k(k, len(table))
    return SegmentedWord(tuple(kernels.apply_ranked(list(word), table.ranks, k)))


class Segmenter:
    """Caching segmenter for one ``(table, k)``."""

    def __init__(self, table: MergeTable, k: int | None = None):
        self.table = table
        self.k = len(table) if k is None else k
        _check_k(self.k, len(table))
        self._cache: dict[str, tuple[str, ...]] = {}

    def tokens(self, word: str) -> tuple[str, ...]:
        got = self._cache.get(word)
        if got is None:
            got = segment_word(word, self.table, self.k).tokens
            self._cache[word] = got
        return got

    def sentence(self, tokens: Iterable[str]) -> list[str]:
        out: list[str] = []
        for word in tokens:
            out.extend(self.tokens(word))
        return out


def apply_to_corpus(
    sentences: Iterable[Sequence[str]], table: MergeTable, k: int | None = None
) -> list[list[str]]:
    seg = Segmenter(table, k)
    return [seg.sentence(sent) for sent in sentences]


def detokenize(tokens: Sequence[str], strict: bool = False) -> list[str]:
    """Join ``x@@ ... z`` runs back into words.

    A dangling marker at the end of the sequence is malformed: with
    ``strict`` it raises, otherwise a warning is issued and the pending
    pieces are emitted as one token that keeps its final marker.
    """
    words: list[str] = []
    pending: list[str] = []
    for tok in tokens:
        if tok.endswith(MARKER):
            pending.append(tok[: -len(MARKER)])
        else:
            pending.append(tok)
            words.append("".join(pending))
            pending = []
    if pending:
        msg = f"trailing continuation marker after {''.join(pending)!r}"
        if strict:
            raise MalformedInputError(msg)
        warnings.warn(msg, MalformedInputWarning, stacklevel=2)
        words.append("".join(pending) + MARKER)
    return words


def strip_marker(token: str) -> str:
    return token[: -len(MARKER)] if token.endswith(MARKER) else token


def symbol_inventory(table: MergeTable, k: int, alphabet: Iterable[str]) -> set[str]:
    _check_k(k, len(table))
    inventory = set(alphabet)
    inventory.update(op.result for op in table.ops[:k])
    return inventory


def diff_inventory(table: MergeTable, k_old: int, k_new: int) -> list[tuple[str, str, str]]:
    """``(new_symbol, left, right)`` for each op ranked in ``[k_old, k_new)``."""
    if not 0 <= k_old <= k_new <= len(table):
        raise InvalidInputError(f"need 0 <= k_old <= k_new <= {len(table)}, got {k_old}, {k_new}")
    return [(op.result, op.left, op.right) for op in table.ops[k_old:k_new]]


def table_alphabet(table: MergeTable) -> set[str]:
    """Single characters appearing as merge components."""
    return {part for op in table for part in op.pair if len(part) == 1}


def write_merges(table: MergeTable, path) -> None:
    with atomic_writer(path) as fh:
        fh.write(MERGES_HEADER + "\n")
        for op in table:
            fh.write(f"{op.left} {op.right}\n")


def read_merges(path) -> MergeTable:
    lines = read_lines(path)
    if not lines or lines[0] != MERGES_HEADER:
        raise MalformedInputError(f"{path}: missing header {MERGES_HEADER!r}")
    ops = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(" ")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise MalformedInputError(f"{path}:{lineno}: expected 'left right', got {line!r}")
        ops.append(MergeOp(parts[0], parts[1]))
    return MergeTable(ops)


def vocab_counts(segmented: Iterable[Sequence[str]]) -> list[tuple[str, int]]:
    """Token counts sorted by descending count, then lexicographically."""
    counts: Counter[str] = Counter()
    for sent in segmented:
        counts.update(sent)
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


def write_vocab(items: Iterable[tuple[str, int]], path) -> None:
    with atomic_writer(path) as fh:
        for sym, count in items:
            fh.write(f"{sym}\t{count}\n")


def read_vocab(path) -> dict[str, int]:
    counts: dict[str, int] = {}
    for lineno, line in enumerate(read_lines(path), start=1):
        parts = line.split("\t")
        if len(parts) != 2:
            raise MalformedInputError(f"{path}:{lineno}: expected 'symbol<TAB>count'")
        try:
            counts[parts[0]] = int(parts[1])
        except ValueError:
            raise MalformedInputError(f"{path}:{lineno}: bad count {parts[1]!r}") from None
    return counts
